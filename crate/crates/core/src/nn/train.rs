//! Mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{loss_and_grad_unchecked, Model};
use super::params::Parameters;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged in epoch {epoch} (non-finite loss)")]
    /// 1-based epoch in which the loss or a weight became non-finite.
    Divergence { epoch: usize },
    #[error("invalid training setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] NnError),
}

/// Mean loss of every optimizer step, plus per-epoch means.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub steps: Vec<f64>,
    pub epochs: Vec<f64>,
}

/// Trains `model` in place with Adam on mean per-batch cross-entropy.
///
/// Samples are reshuffled every epoch from a generator seeded with `seed`;
/// gradients are summed in sample order, so results are bit-reproducible.
pub fn train(
    model: &mut Model,
    features: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<LossTrace, TrainError> {
    if features.len() != labels.len() {
        return Err(TrainError::Invalid(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(TrainError::Invalid("empty training set".into()));
    }
    if config.batch_size == 0 {
        return Err(TrainError::Invalid("batch size must be positive".into()));
    }
    config.adam.validate().map_err(TrainError::Invalid)?;
    let classes = model.spec.num_classes();
    for (row, &label) in features.iter().zip(labels) {
        if row.len() != model.spec.input_len {
            return Err(TrainError::Invalid(format!(
                "row has {} features, model expects {}",
                row.len(),
                model.spec.input_len
            )));
        }
        if label >= classes {
            return Err(NnError::LabelOutOfRange { label, classes }.into());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut state = AdamState::new(&model.params, config.adam);
    let mut trace = LossTrace::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut total = model.params.zeros_like();
            let mut loss = 0.0;
            for &i in batch {
                let (l, g) = loss_and_grad_unchecked(&model.spec, &model.params, &features[i], labels[i]);
                loss += l;
                for (acc, gi) in total.tensors_mut().into_iter().zip(g.tensors()) {
                    acc.add_assign(gi);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            loss *= scale;
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch: epoch + 1 });
            }
            for t in total.tensors_mut() {
                t.scale(scale);
            }
            adam_step(&mut state, &mut model.params, &total).map_err(NnError::from)?;
            if !model.params.is_finite() {
                return Err(TrainError::Divergence { epoch: epoch + 1 });
            }
            trace.steps.push(loss);
            epoch_loss += loss * batch.len() as f64;
        }
        trace.epochs.push(epoch_loss / features.len() as f64);
    }
    Ok(trace)
}

/// Mean cross-entropy over a data set.
pub fn mean_loss(model: &Model, features: &[Vec<f64>], labels: &[usize]) -> Result<f64, NnError> {
    let mut total = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        total += super::model::model_loss(&model.spec, &model.params, x, y)?;
    }
    Ok(total / features.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::nn::spec::{ModelSpec, OutputLayer};

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                (0..6).map(|j| s * (1.0 + 0.1 * j as f64)).collect()
            })
            .collect();
        let ys = (0..12).map(|i| i % 2).collect();
        (xs, ys)
    }

    #[test]
    fn loss_goes_down_on_toy_problem() {
        let (xs, ys) = toy();
        let spec = ModelSpec::tiny(6, OutputLayer::Sigmoid, ActivationKind::Mish);
        let mut model = Model::new(spec, vec!["a".into(), "b".into()], 4).unwrap();
        let before = mean_loss(&model, &xs, &ys).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 4,
            adam: AdamConfig::with_lr(0.01),
        };
        let trace = train(&mut model, &xs, &ys, &cfg, 1).unwrap();
        assert_eq!(trace.steps.len(), 60 * 3);
        assert_eq!(trace.epochs.len(), 60);
        let after = mean_loss(&model, &xs, &ys).unwrap();
        assert!(after < before * 0.5, "{before} -> {after}");
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (xs, ys) = toy();
        let spec = ModelSpec::tiny(6, OutputLayer::Sigmoid, ActivationKind::ReLU);
        let run = || {
            let mut m = Model::new(spec, vec!["a".into(), "b".into()], 8).unwrap();
            let cfg = TrainConfig {
                epochs: 5,
                batch_size: 5,
                adam: AdamConfig::default(),
            };
            let t = train(&mut m, &xs, &ys, &cfg, 3).unwrap();
            (m, t)
        };
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a.params, b.params);
        assert_eq!(ta, tb);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let (xs, ys) = toy();
        let spec = ModelSpec::tiny(6, OutputLayer::Sigmoid, ActivationKind::ReLU);
        let mut m = Model::new(spec, vec!["a".into(), "b".into()], 8).unwrap();
        let cfg = TrainConfig::default();
        assert!(train(&mut m, &xs, &ys[..3], &cfg, 0).is_err());
        assert!(train(&mut m, &[], &[], &cfg, 0).is_err());
        let mut bad = ys.clone();
        bad[0] = 2;
        assert!(train(&mut m, &xs, &bad, &cfg, 0).is_err());
        let zero_batch = TrainConfig { batch_size: 0, ..cfg };
        assert!(train(&mut m, &xs, &ys, &zero_batch, 0).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence_or_stays_finite() {
        let (xs, ys) = toy();
        let spec = ModelSpec::tiny(6, OutputLayer::Sigmoid, ActivationKind::Linear);
        let mut m = Model::new(spec, vec!["a".into(), "b".into()], 8).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 12,
            adam: AdamConfig::with_lr(1e200),
        };
        match train(&mut m, &xs, &ys, &cfg, 0) {
            Err(TrainError::Divergence { epoch }) => assert!((1..=50).contains(&epoch)),
            Ok(trace) => assert!(trace.steps.iter().all(|l| l.is_finite())),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
