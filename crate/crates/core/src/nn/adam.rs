use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::tensor::ShapeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.lr) || !ok(self.epsilon) {
            return Err("adam learning rate and epsilon must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err("adam betas must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Moment estimates for every parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<P: Parameters> {
    pub config: AdamConfig,
    step: u64,
    m: P,
    v: P,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &P {
        &self.m
    }

    pub fn second_moment(&self) -> &P {
        &self.v
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<P: Parameters>(state: &mut AdamState<P>, params: &mut P, grads: &P) -> Result<(), ShapeError> {
    let mut ps = params.tensors_mut();
    let gs = grads.tensors();
    if ps.len() != gs.len() {
        return Err(ShapeError::Invalid(format!(
            "{} gradient tensors for {} parameter tensors",
            gs.len(),
            ps.len()
        )));
    }
    for (p, g) in ps.iter().zip(&gs) {
        if p.shape() != g.shape() {
            return Err(ShapeError::Mismatch {
                context: "adam gradient",
                expected: p.shape().to_vec(),
                actual: g.shape().to_vec(),
            });
        }
    }

    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in ps.iter_mut().zip(&gs).zip(ms).zip(vs) {
        let p = p.data_mut();
        let (m, v) = (m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
