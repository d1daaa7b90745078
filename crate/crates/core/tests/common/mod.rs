//! Test-only oracles shared by the integration tests.
//!
//! Nothing here calls into the engine's math: activations, the GRU cell and
//! the whole forward pass are re-derived from their textbook formulas.

#![allow(dead_code)]

use mishnet::nn::{model_loss, GruCell, Head, ModelParams, ModelSpec, OutputLayer, Parameters};
use mishnet::{ActivationKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straightforward activation formulas, no overflow guards (inputs here are small).
pub fn act(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        ActivationKind::TanH => x.tanh(),
        ActivationKind::ReLU => x.max(0.0),
        ActivationKind::LReLU { alpha } | ActivationKind::PReLU { alpha, .. } => {
            if x > 0.0 {
                x
            } else {
                alpha * x
            }
        }
        ActivationKind::ELU { alpha } => {
            if x > 0.0 {
                x
            } else {
                alpha * (x.exp() - 1.0)
            }
        }
        ActivationKind::Softplus => (1.0 + x.exp()).ln(),
        ActivationKind::Mish => x * (1.0 + x.exp()).ln().tanh(),
        ActivationKind::Linear => x,
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mat_vec(w: &Tensor, v: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|r| (0..w.cols()).map(|c| w.at(r, c) * v[c]).sum())
        .collect()
}

/// One GRU step: `h' = (1 - z) h + z act(W_h x + U_h (r h) + b_h)`.
pub fn gru_cell_step(cell: &GruCell, x: &[f64], h: &[f64], kind: ActivationKind) -> Vec<f64> {
    let add = |a: Vec<f64>, b: Vec<f64>, c: &Tensor| -> Vec<f64> {
        a.iter().zip(&b).zip(c.data()).map(|((p, q), r)| p + q + r).collect()
    };
    let z: Vec<f64> = add(mat_vec(&cell.w_z, x), mat_vec(&cell.u_z, h), &cell.b_z)
        .into_iter()
        .map(sig)
        .collect();
    let r: Vec<f64> = add(mat_vec(&cell.w_r, x), mat_vec(&cell.u_r, h), &cell.b_r)
        .into_iter()
        .map(sig)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = add(mat_vec(&cell.w_h, x), mat_vec(&cell.u_h, &rh), &cell.b_h)
        .into_iter()
        .map(|v| act(kind, v))
        .collect();
    (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect()
}

/// Class probabilities computed the long way round.
pub fn reference_forward(spec: &ModelSpec, p: &ModelParams, x: &[f64]) -> Vec<f64> {
    let slope = |t: &Option<Tensor>| match (spec.hidden_activation, t) {
        (ActivationKind::PReLU { learnable, .. }, Some(a)) => ActivationKind::PReLU {
            alpha: a.data()[0],
            learnable,
        },
        (k, _) => k,
    };
    let (conv_act, gru_act, dense_act) = (slope(&p.prelu_conv), slope(&p.prelu_gru), slope(&p.prelu_dense));

    // conv: out[t][f] = act(b_f + sum_j k[f][j] x[t + j])
    let k = spec.conv_kernel;
    let conv_len = x.len() - k + 1;
    let mut conv = vec![vec![0.0; spec.conv_filters]; conv_len];
    for (t, row) in conv.iter_mut().enumerate() {
        for (f, out) in row.iter_mut().enumerate() {
            let mut s = p.conv_bias.data()[f];
            for j in 0..k {
                s += p.conv_kernel.at(f, j) * x[t + j];
            }
            *out = act(conv_act, s);
        }
    }
    // max pool, first maximum wins
    let steps = conv_len / spec.pool_size;
    let seq: Vec<Vec<f64>> = (0..steps)
        .map(|i| {
            (0..spec.conv_filters)
                .map(|f| {
                    (i * spec.pool_size..(i + 1) * spec.pool_size)
                        .map(|t| conv[t][f])
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect();
    // both directions
    let units = spec.gru_units;
    let mut fwd = vec![vec![0.0; units]; steps];
    let mut h = vec![0.0; units];
    for t in 0..steps {
        h = gru_cell_step(&p.gru.forward, &seq[t], &h, gru_act);
        fwd[t] = h.clone();
    }
    let mut bwd = vec![vec![0.0; units]; steps];
    let mut h = vec![0.0; units];
    for t in (0..steps).rev() {
        h = gru_cell_step(&p.gru.backward, &seq[t], &h, gru_act);
        bwd[t] = h.clone();
    }
    let head: Vec<f64> = match spec.head {
        Head::Dense => {
            let d = p.dense.as_ref().expect("dense head has weights");
            let mut input = fwd[steps - 1].clone();
            input.extend_from_slice(&bwd[0]);
            mat_vec(&d.weight, &input)
                .iter()
                .zip(d.bias.data())
                .map(|(v, b)| act(dense_act, v + b))
                .collect()
        }
        Head::GlobalAveragePool => (0..2 * units)
            .map(|c| {
                (0..steps)
                    .map(|t| if c < units { fwd[t][c] } else { bwd[t][c - units] })
                    .sum::<f64>()
                    / steps as f64
            })
            .collect(),
    };
    let logits: Vec<f64> = mat_vec(&p.output.weight, &head)
        .iter()
        .zip(p.output.bias.data())
        .map(|(v, b)| v + b)
        .collect();
    match spec.output {
        OutputLayer::Sigmoid => {
            let q = sig(logits[0]);
            vec![1.0 - q, q]
        }
        OutputLayer::Softmax { .. } => {
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        }
    }
}

/// Glorot weights plus small random biases, so every parameter matters.
pub fn random_params(spec: &ModelSpec, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::init(spec, &mut rng);
    for (name, t) in p.named_tensors_mut() {
        if name.contains("bias") || name.contains(".b_") {
            for v in t.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
    p
}

pub fn random_input(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Step for the central differences.
pub const FD_STEP: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale; below it
/// the O(h^2) truncation error of the central difference dominates.
pub const FD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FdResult {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `model_loss` for every
/// scalar parameter. Relative error is `|a - n| / max(|a|, |n|, FD_FLOOR)`.
pub fn finite_difference_check(
    spec: &ModelSpec,
    params: &ModelParams,
    analytic: &ModelParams,
    x: &[f64],
    label: usize,
) -> FdResult {
    let mut probe = params.clone();
    let names: Vec<&'static str> = params.named_tensors().iter().map(|(n, _)| *n).collect();
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.data().to_vec()).collect();
    let mut out = FdResult {
        max_rel_error: 0.0,
        worst_param: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, g) in grads.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let orig = probe.tensors()[ti].data()[i];
            probe.tensors_mut()[ti].data_mut()[i] = orig + FD_STEP;
            let up = model_loss(spec, &probe, x, label).unwrap();
            probe.tensors_mut()[ti].data_mut()[i] = orig - FD_STEP;
            let down = model_loss(spec, &probe, x, label).unwrap();
            probe.tensors_mut()[ti].data_mut()[i] = orig;
            let n = (up - down) / (2.0 * FD_STEP);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR);
            out.checked += 1;
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst_param = format!("{}[{i}]", names[ti]);
                out.analytic = a;
                out.numeric = n;
            }
        }
    }
    out
}

/// Full-batch Adam on `xs`, stopping as soon as the mean loss drops below
/// `target`. Returns the number of steps taken and the last loss seen.
pub fn steps_to_fit(
    model: &mut mishnet::nn::Model,
    xs: &[Vec<f64>],
    ys: &[usize],
    lr: f64,
    max_steps: usize,
    target: f64,
) -> (usize, f64) {
    use mishnet::nn::{adam_step, AdamConfig, AdamState};
    let mut state = AdamState::new(&model.params, AdamConfig::with_lr(lr));
    let scale = 1.0 / xs.len() as f64;
    let mut loss = f64::INFINITY;
    for step in 0..=max_steps {
        let mut total = model.params.zeros_like();
        loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let (l, g) = model.loss_and_grad(x, y).unwrap();
            loss += l * scale;
            for (acc, gi) in total.tensors_mut().into_iter().zip(g.tensors()) {
                acc.add_assign(gi);
            }
        }
        if loss < target || step == max_steps {
            return (step, loss);
        }
        for t in total.tensors_mut() {
            t.scale(scale);
        }
        adam_step(&mut state, &mut model.params, &total).unwrap();
    }
    (max_steps, loss)
}

/// `n` uniform random rows in [-1, 1) with uniformly random labels.
pub fn random_labelled(n: usize, features: usize, classes: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..n)
        .map(|_| (0..features).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let ys = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (xs, ys)
}

/// Least-squares slope of `w` against its index.
pub fn slope(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = w.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in w.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}
