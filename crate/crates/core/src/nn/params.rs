use rand::Rng;

use super::spec::{Head, ModelSpec};
use crate::tensor::{ShapeError, Tensor};

/// A collection of tensors that an optimizer can walk in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn zeros_like(&self) -> Self;
}

impl Parameters for Tensor {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![self]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![self]
    }
    fn zeros_like(&self) -> Self {
        Tensor::zeros(self.shape())
    }
}

/// Weights of one GRU direction. Input weights are `[units, input]`,
/// recurrent weights `[units, units]`, biases `[units]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

impl GruCell {
    pub fn zeros(input: usize, units: usize) -> Self {
        let w = Tensor::zeros(&[units, input]);
        let u = Tensor::zeros(&[units, units]);
        let b = Tensor::zeros(&[units]);
        Self {
            w_z: w.clone(),
            w_r: w.clone(),
            w_h: w,
            u_z: u.clone(),
            u_r: u.clone(),
            u_h: u,
            b_z: b.clone(),
            b_r: b.clone(),
            b_h: b,
        }
    }

    pub fn units(&self) -> usize {
        self.b_z.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    fn refs(&self) -> [&Tensor; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }

    fn refs_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub(crate) fn validate(&self, input: usize, units: usize) -> Result<(), ShapeError> {
        for w in [&self.w_z, &self.w_r, &self.w_h] {
            w.expect_shape("gru input weight", &[units, input])?;
        }
        for u in [&self.u_z, &self.u_r, &self.u_h] {
            u.expect_shape("gru recurrent weight", &[units, units])?;
        }
        for b in [&self.b_z, &self.b_r, &self.b_h] {
            b.expect_shape("gru bias", &[units])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGruParams {
    pub forward: GruCell,
    pub backward: GruCell,
}

impl BiGruParams {
    pub fn zeros(input: usize, units: usize) -> Self {
        Self {
            forward: GruCell::zeros(input, units),
            backward: GruCell::zeros(input, units),
        }
    }

    pub fn units(&self) -> usize {
        self.forward.units()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `[out, in]`
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }
}

/// Every trainable tensor of the CNN-BiGRU model.
///
/// The PReLU slopes are present only when the hidden activation is PReLU:
/// one scalar for the convolution, one for the BiGRU candidate and one for
/// the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `[filters, kernel]`
    pub conv_kernel: Tensor,
    pub conv_bias: Tensor,
    pub gru: BiGruParams,
    pub dense: Option<DenseParams>,
    pub output: DenseParams,
    pub prelu_conv: Option<Tensor>,
    pub prelu_gru: Option<Tensor>,
    pub prelu_dense: Option<Tensor>,
}

const GRU_FWD_NAMES: [&str; 9] = [
    "gru.fwd.w_z",
    "gru.fwd.w_r",
    "gru.fwd.w_h",
    "gru.fwd.u_z",
    "gru.fwd.u_r",
    "gru.fwd.u_h",
    "gru.fwd.b_z",
    "gru.fwd.b_r",
    "gru.fwd.b_h",
];
const GRU_BWD_NAMES: [&str; 9] = [
    "gru.bwd.w_z",
    "gru.bwd.w_r",
    "gru.bwd.w_h",
    "gru.bwd.u_z",
    "gru.bwd.u_r",
    "gru.bwd.u_h",
    "gru.bwd.b_z",
    "gru.bwd.b_r",
    "gru.bwd.b_h",
];

impl ModelParams {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let units = spec.gru_units;
        let dense = match spec.head {
            Head::Dense => Some(DenseParams::zeros(2 * units, spec.dense_units)),
            Head::GlobalAveragePool => None,
        };
        let prelu = spec.hidden_activation.is_prelu();
        let alpha = spec.hidden_activation.alpha().unwrap_or(0.0);
        let slope = || prelu.then(|| Tensor::filled(&[1], alpha));
        Self {
            conv_kernel: Tensor::zeros(&[spec.conv_filters, spec.conv_kernel]),
            conv_bias: Tensor::zeros(&[spec.conv_filters]),
            gru: BiGruParams::zeros(spec.conv_filters, units),
            prelu_dense: if dense.is_some() { slope() } else { None },
            dense,
            output: DenseParams::zeros(spec.head_dim(), spec.output.logits()),
            prelu_conv: slope(),
            prelu_gru: slope(),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))` per weight
    /// tensor (fan_in = columns, fan_out = rows), zero biases, PReLU slopes
    /// at the activation's configured value.
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for (name, t) in params.named_tensors_mut() {
            if is_weight(name) {
                let limit = (6.0 / (t.cols() + t.rows()) as f64).sqrt();
                for v in t.data_mut() {
                    *v = rng.random_range(-limit..limit);
                }
            }
        }
        params
    }

    /// Tensor names in serialization order.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out: Vec<(&'static str, &Tensor)> =
            vec![("conv.kernel", &self.conv_kernel), ("conv.bias", &self.conv_bias)];
        for (names, cell) in [
            (&GRU_FWD_NAMES, &self.gru.forward),
            (&GRU_BWD_NAMES, &self.gru.backward),
        ] {
            out.extend(names.iter().copied().zip(cell.refs()));
        }
        if let Some(d) = &self.dense {
            out.push(("dense.weight", &d.weight));
            out.push(("dense.bias", &d.bias));
        }
        out.push(("output.weight", &self.output.weight));
        out.push(("output.bias", &self.output.bias));
        for (n, t) in [
            ("prelu.conv", &self.prelu_conv),
            ("prelu.gru", &self.prelu_gru),
            ("prelu.dense", &self.prelu_dense),
        ] {
            if let Some(t) = t {
                out.push((n, t));
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out: Vec<(&'static str, &mut Tensor)> = vec![
            ("conv.kernel", &mut self.conv_kernel),
            ("conv.bias", &mut self.conv_bias),
        ];
        out.extend(GRU_FWD_NAMES.iter().copied().zip(self.gru.forward.refs_mut()));
        out.extend(GRU_BWD_NAMES.iter().copied().zip(self.gru.backward.refs_mut()));
        if let Some(d) = &mut self.dense {
            out.push(("dense.weight", &mut d.weight));
            out.push(("dense.bias", &mut d.bias));
        }
        out.push(("output.weight", &mut self.output.weight));
        out.push(("output.bias", &mut self.output.bias));
        for (n, t) in [
            ("prelu.conv", &mut self.prelu_conv),
            ("prelu.gru", &mut self.prelu_gru),
            ("prelu.dense", &mut self.prelu_dense),
        ] {
            if let Some(t) = t {
                out.push((n, t));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Rounds every value to the nearest `f32`, the precision of the model file.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            for v in t.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Checks every tensor against the shapes `spec` implies.
    pub fn validate(&self, spec: &ModelSpec) -> Result<(), ShapeError> {
        let expected = ModelParams::zeros(spec);
        let ours = self.named_tensors();
        let theirs = expected.named_tensors();
        if ours.len() != theirs.len() {
            return Err(ShapeError::Invalid(format!(
                "expected {} parameter tensors, got {}",
                theirs.len(),
                ours.len()
            )));
        }
        for ((name, t), (_, e)) in ours.iter().zip(&theirs) {
            if t.shape() != e.shape() {
                return Err(ShapeError::Invalid(format!(
                    "parameter {name}: expected shape {:?}, got {:?}",
                    e.shape(),
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

fn is_weight(name: &str) -> bool {
    name.ends_with("weight") || name == "conv.kernel" || name.contains(".w_") || name.contains(".u_")
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.named_tensors_mut().into_iter().map(|(_, t)| t).collect()
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::nn::spec::OutputLayer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_counts() {
        let spec = ModelSpec::tiny(8, OutputLayer::Softmax { classes: 3 }, ActivationKind::Mish);
        let p = ModelParams::zeros(&spec);
        let names: Vec<&str> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 2 + 18 + 2 + 2);
        assert_eq!(names[0], "conv.kernel");
        assert_eq!(names[2], "gru.fwd.w_z");
        assert_eq!(names[11], "gru.bwd.w_z");
        assert_eq!(*names.last().unwrap(), "output.bias");
        // conv 2*3+2, gru 2*(3*(2*2)+3*(2*2)+3*2), dense 4*4+4, out 3*4+3
        assert_eq!(p.parameter_count(), 8 + 2 * (12 + 12 + 6) + 20 + 15);
        p.validate(&spec).unwrap();
    }

    #[test]
    fn prelu_adds_slopes() {
        let act = ActivationKind::prelu(0.2, true).unwrap();
        let spec = ModelSpec::tiny(8, OutputLayer::Sigmoid, act);
        let p = ModelParams::zeros(&spec);
        assert_eq!(p.prelu_conv.as_ref().unwrap().data(), &[0.2]);
        assert!(p.prelu_dense.is_some());
        let gap = ModelParams::zeros(&spec.with_head(Head::GlobalAveragePool));
        assert!(gap.prelu_dense.is_none() && gap.dense.is_none());
        assert_eq!(gap.output.weight.shape(), &[1, 4]);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let spec = ModelSpec::new(16, OutputLayer::Softmax { classes: 3 }, ActivationKind::ReLU);
        let p = ModelParams::init(&spec, &mut ChaCha8Rng::seed_from_u64(7));
        let lim = (6.0f64 / (32.0 + 64.0)).sqrt();
        assert!(p.gru.forward.w_z.data().iter().all(|v| v.abs() < lim));
        assert!(p.gru.forward.w_z.data().iter().any(|v| v.abs() > lim * 0.5));
        assert!(p.gru.backward.b_h.data().iter().all(|&v| v == 0.0));
        assert!(p.output.bias.data().iter().all(|&v| v == 0.0));
        let again = ModelParams::init(&spec, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(p, again);
    }

    #[test]
    fn validate_catches_wrong_shapes() {
        let spec = ModelSpec::tiny(8, OutputLayer::Sigmoid, ActivationKind::ReLU);
        let mut p = ModelParams::zeros(&spec);
        p.gru.backward.u_r = Tensor::zeros(&[3, 2]);
        assert!(p.validate(&spec).is_err());
    }
}
