//! Full-model forward pass, losses and reverse-mode gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{concat_directions, conv1d_pre, gap, gru_run, maxpool, GruTrace};
use super::params::{GruCell, ModelParams, Parameters};
use super::spec::{Head, ModelSpec, OutputLayer};
use super::NnError;
use crate::activation::{sigmoid, softmax_unchecked, ActivationKind};
use crate::tensor::{matvec, matvec_t_acc, outer_acc, Tensor};

/// Probabilities are clamped to this floor before taking a log.
pub const PROB_FLOOR: f64 = 1e-12;

/// A model specification, its weights and the names of its classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub class_names: Vec<String>,
}

impl Model {
    /// Fresh Glorot-initialised model.
    pub fn new(spec: ModelSpec, class_names: Vec<String>, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let params = ModelParams::init(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
        Self::from_parts(spec, params, class_names)
    }

    pub fn from_parts(spec: ModelSpec, params: ModelParams, class_names: Vec<String>) -> Result<Self, NnError> {
        spec.validate()?;
        params.validate(&spec)?;
        if class_names.len() != spec.num_classes() {
            return Err(NnError::Domain(format!(
                "{} class names for a {}-class model",
                class_names.len(),
                spec.num_classes()
            )));
        }
        Ok(Self {
            spec,
            params,
            class_names,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        check_input(&self.spec, x)?;
        Ok(trace(&self.spec, &self.params, x).probs)
    }

    /// Index of the most probable class (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize, NnError> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn loss_and_grad(&self, x: &[f64], label: usize) -> Result<(f64, ModelParams), NnError> {
        check_input(&self.spec, x)?;
        check_label(&self.spec, label)?;
        Ok(loss_and_grad_unchecked(&self.spec, &self.params, x, label))
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Class probabilities for one sample. A sigmoid head yields `[1 - p, p]`.
pub fn model_forward(spec: &ModelSpec, params: &ModelParams, x: &[f64]) -> Result<Vec<f64>, NnError> {
    spec.validate()?;
    params.validate(spec)?;
    check_input(spec, x)?;
    Ok(trace(spec, params, x).probs)
}

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy_loss(probs: &[f64], label: usize) -> Result<f64, NnError> {
    let p = probs.get(label).ok_or(NnError::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// `-[y ln p + (1 - y) ln(1 - p)]` with both probabilities clamped.
pub fn binary_cross_entropy(p: f64, label: usize) -> Result<f64, NnError> {
    match label {
        0 => Ok(-(1.0 - p).max(PROB_FLOOR).ln()),
        1 => Ok(-p.max(PROB_FLOOR).ln()),
        _ => Err(NnError::LabelOutOfRange { label, classes: 2 }),
    }
}

/// Loss of the model on one sample, with the loss that matches its output layer.
pub fn model_loss(spec: &ModelSpec, params: &ModelParams, x: &[f64], label: usize) -> Result<f64, NnError> {
    check_label(spec, label)?;
    let probs = model_forward(spec, params, x)?;
    match spec.output {
        OutputLayer::Softmax { .. } => cross_entropy_loss(&probs, label),
        OutputLayer::Sigmoid => binary_cross_entropy(probs[1], label),
    }
}

/// Loss and exact gradients with respect to every parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub grads: ModelParams,
}

pub fn backward(spec: &ModelSpec, params: &ModelParams, x: &[f64], label: usize) -> Result<Gradients, NnError> {
    spec.validate()?;
    params.validate(spec)?;
    check_input(spec, x)?;
    check_label(spec, label)?;
    let (loss, grads) = loss_and_grad_unchecked(spec, params, x, label);
    Ok(Gradients { loss, grads })
}

fn check_input(spec: &ModelSpec, x: &[f64]) -> Result<(), NnError> {
    if x.len() != spec.input_len {
        return Err(NnError::Shape(crate::tensor::ShapeError::Mismatch {
            context: "model input",
            expected: vec![spec.input_len],
            actual: vec![x.len()],
        }));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("model input"));
    }
    Ok(())
}

fn check_label(spec: &ModelSpec, label: usize) -> Result<(), NnError> {
    if label >= spec.num_classes() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: spec.num_classes(),
        });
    }
    Ok(())
}

/// The hidden activations with any PReLU slope taken from the parameters.
struct LayerActivations {
    conv: ActivationKind,
    gru: ActivationKind,
    dense: ActivationKind,
}

impl LayerActivations {
    fn new(spec: &ModelSpec, params: &ModelParams) -> Self {
        let kind = spec.hidden_activation;
        let slope = |t: &Option<Tensor>| match t {
            Some(t) => kind.with_prelu_alpha(t.data()[0]),
            None => kind,
        };
        Self {
            conv: slope(&params.prelu_conv),
            gru: slope(&params.prelu_gru),
            dense: slope(&params.prelu_dense),
        }
    }
}

struct Trace {
    acts: LayerActivations,
    conv_pre: Vec<f64>,
    pool_arg: Vec<usize>,
    pooled: Vec<f64>,
    fwd: GruTrace,
    bwd: GruTrace,
    head_in: Vec<f64>,
    dense_pre: Vec<f64>,
    head_out: Vec<f64>,
    probs: Vec<f64>,
}

fn trace(spec: &ModelSpec, params: &ModelParams, x: &[f64]) -> Trace {
    let acts = LayerActivations::new(spec, params);
    let filters = spec.conv_filters;
    let steps = spec.seq_len();
    let units = spec.gru_units;

    let conv_pre = conv1d_pre(x, &params.conv_kernel, &params.conv_bias);
    let conv_out: Vec<f64> = conv_pre.iter().map(|&v| acts.conv.apply(v)).collect();
    let (pooled, pool_arg) = maxpool(&conv_out, spec.conv_len(), filters, spec.pool_size);

    let fwd = gru_run(&pooled, steps, &params.gru.forward, acts.gru, false);
    let bwd = gru_run(&pooled, steps, &params.gru.backward, acts.gru, true);

    let (head_in, dense_pre, head_out) = match (&spec.head, &params.dense) {
        (Head::Dense, Some(dense)) => {
            // final state of each direction
            let mut head_in = fwd.at(&fwd.h, steps - 1).to_vec();
            head_in.extend_from_slice(bwd.at(&bwd.h, 0));
            let mut pre = vec![0.0; dense.bias.len()];
            matvec(&dense.weight, &head_in, &mut pre);
            for (p, b) in pre.iter_mut().zip(dense.bias.data()) {
                *p += b;
            }
            let out = pre.iter().map(|&v| acts.dense.apply(v)).collect();
            (head_in, pre, out)
        }
        _ => {
            let seq = concat_directions(&fwd, &bwd, steps);
            let pooled_seq = gap(&seq, steps, 2 * units);
            (Vec::new(), Vec::new(), pooled_seq)
        }
    };

    let mut logits = vec![0.0; spec.output.logits()];
    matvec(&params.output.weight, &head_out, &mut logits);
    for (l, b) in logits.iter_mut().zip(params.output.bias.data()) {
        *l += b;
    }
    let probs = match spec.output {
        OutputLayer::Softmax { .. } => softmax_unchecked(&logits),
        OutputLayer::Sigmoid => vec![sigmoid(-logits[0]), sigmoid(logits[0])],
    };

    Trace {
        acts,
        conv_pre,
        pool_arg,
        pooled,
        fwd,
        bwd,
        head_in,
        dense_pre,
        head_out,
        probs,
    }
}

pub(crate) fn loss_and_grad_unchecked(
    spec: &ModelSpec,
    params: &ModelParams,
    x: &[f64],
    label: usize,
) -> (f64, ModelParams) {
    let tr = trace(spec, params, x);
    let mut grads = params.zeros_like();

    // The clamp makes the loss flat below the floor, so its gradient is zero there.
    let (loss, dlogits) = match spec.output {
        OutputLayer::Softmax { .. } => {
            let p = tr.probs[label];
            let mut d = tr.probs.clone();
            if p < PROB_FLOOR {
                d.fill(0.0);
            } else {
                d[label] -= 1.0;
            }
            (-p.max(PROB_FLOOR).ln(), d)
        }
        OutputLayer::Sigmoid => {
            let p = tr.probs[label];
            let d = if p < PROB_FLOOR {
                0.0
            } else {
                tr.probs[1] - label as f64
            };
            (-p.max(PROB_FLOOR).ln(), vec![d])
        }
    };

    outer_acc(&mut grads.output.weight, &dlogits, &tr.head_out);
    for (g, d) in grads.output.bias.data_mut().iter_mut().zip(&dlogits) {
        *g += d;
    }
    let mut dhead = vec![0.0; tr.head_out.len()];
    matvec_t_acc(&params.output.weight, &dlogits, &mut dhead);

    let steps = spec.seq_len();
    let units = spec.gru_units;
    let mut dfwd = vec![0.0; steps * units];
    let mut dbwd = vec![0.0; steps * units];
    match (&params.dense, &mut grads.dense) {
        (Some(dense), Some(gdense)) => {
            let mut dpre = vec![0.0; dhead.len()];
            let mut dalpha = 0.0;
            for i in 0..dhead.len() {
                dpre[i] = dhead[i] * tr.acts.dense.derivative(tr.dense_pre[i]);
                dalpha += dhead[i] * tr.acts.dense.alpha_derivative(tr.dense_pre[i]);
            }
            accumulate_alpha(&mut grads.prelu_dense, spec, dalpha);
            outer_acc(&mut gdense.weight, &dpre, &tr.head_in);
            for (g, d) in gdense.bias.data_mut().iter_mut().zip(&dpre) {
                *g += d;
            }
            let mut dhead_in = vec![0.0; tr.head_in.len()];
            matvec_t_acc(&dense.weight, &dpre, &mut dhead_in);
            dfwd[(steps - 1) * units..].copy_from_slice(&dhead_in[..units]);
            dbwd[..units].copy_from_slice(&dhead_in[units..]);
        }
        _ => {
            let inv = 1.0 / steps as f64;
            for t in 0..steps {
                for i in 0..units {
                    dfwd[t * units + i] = dhead[i] * inv;
                    dbwd[t * units + i] = dhead[units + i] * inv;
                }
            }
        }
    }

    let filters = spec.conv_filters;
    let mut dpooled = vec![0.0; steps * filters];
    let mut dalpha_gru = 0.0;
    dalpha_gru += gru_backward(
        &tr.fwd,
        &tr.pooled,
        &params.gru.forward,
        tr.acts.gru,
        &dfwd,
        &mut grads.gru.forward,
        &mut dpooled,
    );
    dalpha_gru += gru_backward(
        &tr.bwd,
        &tr.pooled,
        &params.gru.backward,
        tr.acts.gru,
        &dbwd,
        &mut grads.gru.backward,
        &mut dpooled,
    );
    accumulate_alpha(&mut grads.prelu_gru, spec, dalpha_gru);

    // max-pool routes each gradient to the winning position only
    let mut dconv = vec![0.0; tr.conv_pre.len()];
    for (j, &src) in tr.pool_arg.iter().enumerate() {
        let c = j % filters;
        dconv[src * filters + c] += dpooled[j];
    }
    let width = spec.conv_kernel;
    let mut dalpha_conv = 0.0;
    for t in 0..spec.conv_len() {
        for f in 0..filters {
            let idx = t * filters + f;
            if dconv[idx] == 0.0 {
                continue;
            }
            let pre = tr.conv_pre[idx];
            let d = dconv[idx] * tr.acts.conv.derivative(pre);
            dalpha_conv += dconv[idx] * tr.acts.conv.alpha_derivative(pre);
            grads.conv_bias.data_mut()[f] += d;
            let row = &mut grads.conv_kernel.data_mut()[f * width..(f + 1) * width];
            for (g, xv) in row.iter_mut().zip(&x[t..t + width]) {
                *g += d * xv;
            }
        }
    }
    accumulate_alpha(&mut grads.prelu_conv, spec, dalpha_conv);

    (loss, grads)
}

fn accumulate_alpha(slot: &mut Option<Tensor>, spec: &ModelSpec, d: f64) {
    if let (Some(t), ActivationKind::PReLU { learnable: true, .. }) = (slot, spec.hidden_activation) {
        t.data_mut()[0] += d;
    }
}

/// Backpropagation through time for one direction. Adds input gradients to
/// `dseq` and returns the gradient with respect to the candidate's PReLU
/// slope.
fn gru_backward(
    tr: &GruTrace,
    seq: &[f64],
    cell: &GruCell,
    act: ActivationKind,
    dout: &[f64],
    g: &mut GruCell,
    dseq: &mut [f64],
) -> f64 {
    let units = tr.units;
    let input = cell.input_dim();
    let steps = dout.len() / units;
    let mut carry = vec![0.0; units];
    let mut dalpha = 0.0;

    let mut dh = vec![0.0; units];
    let mut da_z = vec![0.0; units];
    let mut da_r = vec![0.0; units];
    let mut da_h = vec![0.0; units];
    let mut rh = vec![0.0; units];
    let mut drh = vec![0.0; units];
    let mut dprev = vec![0.0; units];

    for t in tr.time_order(steps).rev() {
        let x = &seq[t * input..(t + 1) * input];
        let hp = tr.at(&tr.h_prev, t);
        let z = tr.at(&tr.z, t);
        let r = tr.at(&tr.r, t);
        let a_h = tr.at(&tr.a_h, t);
        let cand = tr.at(&tr.cand, t);
        for i in 0..units {
            dh[i] = dout[t * units + i] + carry[i];
        }
        for i in 0..units {
            let dz = dh[i] * (cand[i] - hp[i]);
            let dcand = dh[i] * z[i];
            dprev[i] = dh[i] * (1.0 - z[i]);
            da_h[i] = dcand * act.derivative(a_h[i]);
            dalpha += dcand * act.alpha_derivative(a_h[i]);
            da_z[i] = dz * z[i] * (1.0 - z[i]);
            rh[i] = r[i] * hp[i];
        }
        outer_acc(&mut g.w_h, &da_h, x);
        outer_acc(&mut g.u_h, &da_h, &rh);
        drh.fill(0.0);
        matvec_t_acc(&cell.u_h, &da_h, &mut drh);
        for i in 0..units {
            let dr = drh[i] * hp[i];
            dprev[i] += drh[i] * r[i];
            da_r[i] = dr * r[i] * (1.0 - r[i]);
        }
        outer_acc(&mut g.w_z, &da_z, x);
        outer_acc(&mut g.u_z, &da_z, hp);
        outer_acc(&mut g.w_r, &da_r, x);
        outer_acc(&mut g.u_r, &da_r, hp);
        for i in 0..units {
            g.b_z.data_mut()[i] += da_z[i];
            g.b_r.data_mut()[i] += da_r[i];
            g.b_h.data_mut()[i] += da_h[i];
        }
        matvec_t_acc(&cell.u_z, &da_z, &mut dprev);
        matvec_t_acc(&cell.u_r, &da_r, &mut dprev);

        let dx = &mut dseq[t * input..(t + 1) * input];
        matvec_t_acc(&cell.w_h, &da_h, dx);
        matvec_t_acc(&cell.w_z, &da_z, dx);
        matvec_t_acc(&cell.w_r, &da_r, dx);

        carry.copy_from_slice(&dprev);
    }
    dalpha
}
