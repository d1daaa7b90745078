//! Forward passes of the individual layers.
//!
//! The public functions take and return [`Tensor`]s and validate shapes. The
//! `pub(crate)` helpers operate on flat slices and keep whatever the
//! backward pass needs.

use super::params::{BiGruParams, GruCell};
use super::NnError;
use crate::activation::{sigmoid, ActivationKind};
use crate::tensor::{matvec, ShapeError, Tensor};

/// Valid (unpadded) stride-1 cross-correlation of a single-channel sequence
/// with `filters` kernels, followed by `act`. Output is `[len - kernel + 1, filters]`.
pub fn conv1d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor, act: ActivationKind) -> Result<Tensor, NnError> {
    if input.shape().len() > 2 || input.cols() != 1 {
        return Err(ShapeError::Invalid(format!("conv1d expects a [len, 1] input, got {:?}", input.shape())).into());
    }
    if kernels.shape().len() != 2 {
        return Err(ShapeError::Invalid("conv1d kernels must be [filters, kernel]".into()).into());
    }
    let (filters, width) = (kernels.rows(), kernels.cols());
    bias.expect_shape("conv1d bias", &[filters])?;
    let len = input.rows();
    if len < width {
        return Err(ShapeError::Invalid(format!("conv1d input length {len} is shorter than kernel {width}")).into());
    }
    let mut out = conv1d_pre(input.data(), kernels, bias);
    for v in &mut out {
        *v = act.apply(*v);
    }
    Ok(Tensor::new(vec![len - width + 1, filters], out)?)
}

/// Pre-activation convolution output, row-major `[len - kernel + 1, filters]`.
pub(crate) fn conv1d_pre(x: &[f64], kernels: &Tensor, bias: &Tensor) -> Vec<f64> {
    let (filters, width) = (kernels.rows(), kernels.cols());
    let out_len = x.len() + 1 - width;
    let mut out = vec![0.0; out_len * filters];
    for t in 0..out_len {
        let window = &x[t..t + width];
        for f in 0..filters {
            let k = kernels.row(f);
            out[t * filters + f] = bias.data()[f] + k.iter().zip(window).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    out
}

/// Non-overlapping max pooling along time (stride = `pool`); a trailing
/// partial window is dropped.
pub fn maxpool1d_forward(input: &Tensor, pool: usize) -> Result<Tensor, NnError> {
    if pool == 0 {
        return Err(NnError::Domain("pool size must be positive".into()));
    }
    let (len, ch) = (input.rows(), input.cols());
    if len < pool {
        return Err(ShapeError::Invalid(format!("maxpool input length {len} is shorter than pool {pool}")).into());
    }
    let (out, _) = maxpool(input.data(), len, ch, pool);
    Ok(Tensor::new(vec![len / pool, ch], out)?)
}

/// Returns the pooled values and, for each output, the source time index.
/// Ties go to the earliest position.
pub(crate) fn maxpool(x: &[f64], len: usize, ch: usize, pool: usize) -> (Vec<f64>, Vec<usize>) {
    let out_len = len / pool;
    let mut out = vec![0.0; out_len * ch];
    let mut arg = vec![0; out_len * ch];
    for i in 0..out_len {
        for c in 0..ch {
            let mut best = i * pool;
            for t in i * pool + 1..(i + 1) * pool {
                if x[t * ch + c] > x[best * ch + c] {
                    best = t;
                }
            }
            out[i * ch + c] = x[best * ch + c];
            arg[i * ch + c] = best;
        }
    }
    (out, arg)
}

/// Per-step record of one GRU direction, indexed by time (not by
/// processing order). Each field is row-major `[T, units]`.
#[derive(Debug, Clone)]
pub(crate) struct GruTrace {
    pub units: usize,
    pub reverse: bool,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    /// candidate pre-activation
    pub a_h: Vec<f64>,
    /// candidate after the configurable activation
    pub cand: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruTrace {
    pub fn time_order(&self, steps: usize) -> impl DoubleEndedIterator<Item = usize> {
        let reverse = self.reverse;
        (0..steps).map(move |s| if reverse { steps - 1 - s } else { s })
    }

    pub fn at<'a>(&self, field: &'a [f64], t: usize) -> &'a [f64] {
        &field[t * self.units..(t + 1) * self.units]
    }
}

/// Runs one GRU direction over `seq` (`[steps, input]`, row-major) from a
/// zero initial state.
pub(crate) fn gru_run(seq: &[f64], steps: usize, cell: &GruCell, act: ActivationKind, reverse: bool) -> GruTrace {
    let units = cell.units();
    let input = cell.input_dim();
    let n = steps * units;
    let mut tr = GruTrace {
        units,
        reverse,
        h_prev: vec![0.0; n],
        z: vec![0.0; n],
        r: vec![0.0; n],
        a_h: vec![0.0; n],
        cand: vec![0.0; n],
        h: vec![0.0; n],
    };
    let mut h = vec![0.0; units];
    let mut wx = vec![0.0; units];
    let mut uh = vec![0.0; units];
    let mut rh = vec![0.0; units];
    for t in tr.time_order(steps).collect::<Vec<_>>() {
        let x = &seq[t * input..(t + 1) * input];
        let row = t * units..(t + 1) * units;

        matvec(&cell.w_z, x, &mut wx);
        matvec(&cell.u_z, &h, &mut uh);
        for i in 0..units {
            tr.z[row.start + i] = sigmoid(wx[i] + uh[i] + cell.b_z.data()[i]);
        }
        matvec(&cell.w_r, x, &mut wx);
        matvec(&cell.u_r, &h, &mut uh);
        for i in 0..units {
            let r = sigmoid(wx[i] + uh[i] + cell.b_r.data()[i]);
            tr.r[row.start + i] = r;
            rh[i] = r * h[i];
        }
        matvec(&cell.w_h, x, &mut wx);
        matvec(&cell.u_h, &rh, &mut uh);
        for i in 0..units {
            let a = wx[i] + uh[i] + cell.b_h.data()[i];
            let c = act.apply(a);
            let z = tr.z[row.start + i];
            tr.a_h[row.start + i] = a;
            tr.cand[row.start + i] = c;
            tr.h_prev[row.start + i] = h[i];
            h[i] = (1.0 - z) * h[i] + z * c;
        }
        tr.h[row].copy_from_slice(&h);
    }
    tr
}

/// Bidirectional GRU over `[T, ch]`; row `t` of the `[T, 2 * units]` output
/// is the forward state at `t` followed by the backward state at `t`.
/// Gates use the logistic sigmoid; `candidate_act` replaces the usual tanh
/// on the candidate state.
pub fn bigru_forward(seq: &Tensor, params: &BiGruParams, candidate_act: ActivationKind) -> Result<Tensor, NnError> {
    let (steps, ch) = (seq.rows(), seq.cols());
    let units = params.units();
    params.forward.validate(ch, units)?;
    params.backward.validate(ch, units)?;
    let fwd = gru_run(seq.data(), steps, &params.forward, candidate_act, false);
    let bwd = gru_run(seq.data(), steps, &params.backward, candidate_act, true);
    Ok(Tensor::new(
        vec![steps, 2 * units],
        concat_directions(&fwd, &bwd, steps),
    )?)
}

pub(crate) fn concat_directions(fwd: &GruTrace, bwd: &GruTrace, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps * 2 * fwd.units);
    for t in 0..steps {
        out.extend_from_slice(fwd.at(&fwd.h, t));
        out.extend_from_slice(bwd.at(&bwd.h, t));
    }
    out
}

/// `act(W x + b)`.
pub fn dense_forward(x: &Tensor, weight: &Tensor, bias: &Tensor, act: ActivationKind) -> Result<Tensor, NnError> {
    if weight.shape().len() != 2 {
        return Err(ShapeError::Invalid("dense weight must be [out, in]".into()).into());
    }
    let (m, n) = (weight.rows(), weight.cols());
    x.expect_shape("dense input", &[n])?;
    bias.expect_shape("dense bias", &[m])?;
    let mut out = vec![0.0; m];
    matvec(weight, x.data(), &mut out);
    for (o, b) in out.iter_mut().zip(bias.data()) {
        *o = act.apply(*o + b);
    }
    Ok(Tensor::vector(out)?)
}

/// Per-channel mean over the time axis of a `[T, ch]` sequence.
pub fn global_average_pool(seq: &Tensor) -> Result<Tensor, NnError> {
    if seq.shape().len() != 2 {
        return Err(ShapeError::Invalid(format!("global average pool expects [T, ch], got {:?}", seq.shape())).into());
    }
    Ok(Tensor::vector(gap(seq.data(), seq.rows(), seq.cols()))?)
}

pub(crate) fn gap(x: &[f64], steps: usize, ch: usize) -> Vec<f64> {
    let mut out = vec![0.0; ch];
    for row in x.chunks_exact(ch) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let inv = 1.0 / steps as f64;
    for o in &mut out {
        *o *= inv;
    }
    out
}
