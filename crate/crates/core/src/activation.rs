//! Scalar activation functions, their first derivatives, and softmax.
//!
//! Every function here is pure. The ReLU family (`relu`, `lrelu`, `prelu`)
//! uses the right derivative at the kink, so `f'(0) = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LRELU_ALPHA: f64 = 0.01;
pub const DEFAULT_ELU_ALPHA: f64 = 1.0;
pub const DEFAULT_PRELU_ALPHA: f64 = 0.25;

/// Above this magnitude `exp` saturates, so softplus and friends switch to
/// their asymptotic forms.
const SOFTPLUS_CUTOFF: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActivationError {
    #[error("activation input must be finite, got {0}")]
    NonFinite(f64),
    #[error("softmax of an empty vector")]
    EmptySoftmax,
    #[error("invalid activation parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "unknown activation `{0}` (expected one of sigmoid, tanh, relu, lrelu, prelu, elu, softplus, mish, linear)"
    )]
    Unknown(String),
}

/// One member of the activation zoo together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActivationKind {
    Sigmoid,
    TanH,
    ReLU,
    LReLU {
        alpha: f64,
    },
    /// Negative-side slope is a trainable parameter when `learnable` is set.
    PReLU {
        alpha: f64,
        learnable: bool,
    },
    ELU {
        alpha: f64,
    },
    Softplus,
    Mish,
    Linear,
}

impl ActivationKind {
    pub fn lrelu(alpha: f64) -> Result<Self, ActivationError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ActivationError::InvalidParameter(format!(
                "lrelu alpha must be finite and > 0, got {alpha}"
            )));
        }
        Ok(Self::LReLU { alpha })
    }

    pub fn elu(alpha: f64) -> Result<Self, ActivationError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ActivationError::InvalidParameter(format!(
                "elu alpha must be finite and > 0, got {alpha}"
            )));
        }
        Ok(Self::ELU { alpha })
    }

    pub fn prelu(alpha: f64, learnable: bool) -> Result<Self, ActivationError> {
        if !alpha.is_finite() {
            return Err(ActivationError::InvalidParameter(format!(
                "prelu alpha must be finite, got {alpha}"
            )));
        }
        Ok(Self::PReLU { alpha, learnable })
    }

    /// Every kind with its default parameters, in canonical order.
    pub fn all() -> [ActivationKind; 9] {
        [
            Self::Sigmoid,
            Self::TanH,
            Self::ReLU,
            Self::LReLU {
                alpha: DEFAULT_LRELU_ALPHA,
            },
            Self::PReLU {
                alpha: DEFAULT_PRELU_ALPHA,
                learnable: true,
            },
            Self::ELU {
                alpha: DEFAULT_ELU_ALPHA,
            },
            Self::Softplus,
            Self::Mish,
            Self::Linear,
        ]
    }

    /// Canonical lowercase name, as used in config files and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::TanH => "tanh",
            Self::ReLU => "relu",
            Self::LReLU { .. } => "lrelu",
            Self::PReLU { .. } => "prelu",
            Self::ELU { .. } => "elu",
            Self::Softplus => "softplus",
            Self::Mish => "mish",
            Self::Linear => "linear",
        }
    }

    /// The slope/scale parameter, for the kinds that have one.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Self::LReLU { alpha } | Self::ELU { alpha } | Self::PReLU { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn is_prelu(&self) -> bool {
        matches!(self, Self::PReLU { .. })
    }

    /// Same kind with its PReLU slope replaced; other kinds are returned as is.
    pub fn with_prelu_alpha(self, new_alpha: f64) -> Self {
        match self {
            Self::PReLU { learnable, .. } => Self::PReLU {
                alpha: new_alpha,
                learnable,
            },
            other => other,
        }
    }

    /// Evaluates the function without input validation.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::Sigmoid => sigmoid(x),
            Self::TanH => tanh(x),
            Self::ReLU => x.max(0.0),
            Self::LReLU { alpha } | Self::PReLU { alpha, .. } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Self::ELU { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
            Self::Softplus => softplus(x),
            Self::Mish => mish(x),
            Self::Linear => x,
        }
    }

    /// First derivative without input validation.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Self::TanH => {
                let t = tanh(x);
                1.0 - t * t
            }
            Self::ReLU => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LReLU { alpha } | Self::PReLU { alpha, .. } => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Self::ELU { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha * x.exp()
                }
            }
            Self::Softplus => sigmoid(x),
            Self::Mish => mish_derivative(x),
            Self::Linear => 1.0,
        }
    }

    /// Derivative with respect to the PReLU slope; zero for every other kind.
    #[inline]
    pub fn alpha_derivative(&self, x: f64) -> f64 {
        match self {
            Self::PReLU { .. } if x < 0.0 => x,
            _ => 0.0,
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = ActivationError;

    /// Accepts the canonical name, optionally followed by `:alpha` for the
    /// parameterised kinds (`lrelu:0.2`, `elu:0.5`, `prelu:0.1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => {
                let value: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| ActivationError::InvalidParameter(format!("cannot parse alpha in `{s}`")))?;
                (n.trim(), Some(value))
            }
            None => (s, None),
        };
        let name = name.to_ascii_lowercase();
        let kind = match (name.as_str(), param) {
            ("sigmoid", None) => Self::Sigmoid,
            ("tanh", None) => Self::TanH,
            ("relu", None) => Self::ReLU,
            ("lrelu", p) => Self::lrelu(p.unwrap_or(DEFAULT_LRELU_ALPHA))?,
            ("prelu", p) => Self::prelu(p.unwrap_or(DEFAULT_PRELU_ALPHA), true)?,
            ("elu", p) => Self::elu(p.unwrap_or(DEFAULT_ELU_ALPHA))?,
            ("softplus", None) => Self::Softplus,
            ("mish", None) => Self::Mish,
            ("linear", None) => Self::Linear,
            ("sigmoid" | "tanh" | "relu" | "softplus" | "mish" | "linear", Some(_)) => {
                return Err(ActivationError::InvalidParameter(format!(
                    "`{name}` takes no parameter"
                )))
            }
            _ => return Err(ActivationError::Unknown(s.to_string())),
        };
        Ok(kind)
    }
}

impl TryFrom<String> for ActivationKind {
    type Error = ActivationError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ActivationKind> for String {
    fn from(kind: ActivationKind) -> String {
        match kind.alpha() {
            Some(alpha) => format!("{}:{alpha:?}", kind.name()),
            None => kind.name().to_string(),
        }
    }
}

/// `f(x)` for `kind`, rejecting non-finite input.
pub fn activate(kind: ActivationKind, x: f64) -> Result<f64, ActivationError> {
    if !x.is_finite() {
        return Err(ActivationError::NonFinite(x));
    }
    Ok(kind.apply(x))
}

/// `f'(x)` for `kind`, rejecting non-finite input.
pub fn activate_grad(kind: ActivationKind, x: f64) -> Result<f64, ActivationError> {
    if !x.is_finite() {
        return Err(ActivationError::NonFinite(x));
    }
    Ok(kind.derivative(x))
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, ActivationError> {
    if logits.is_empty() {
        return Err(ActivationError::EmptySoftmax);
    }
    if let Some(&bad) = logits.iter().find(|z| !z.is_finite()) {
        return Err(ActivationError::NonFinite(bad));
    }
    Ok(softmax_unchecked(logits))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(e^{2x} - 1) / (e^{2x} + 1)`, evaluated via `expm1` so it neither
/// overflows nor loses precision near zero.
#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum();
    }
    let e = (2.0 * x).exp_m1();
    e / (e + 2.0)
}

/// `ln(1 + e^x)`.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_CUTOFF {
        x + (-x).exp()
    } else if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn mish(x: f64) -> f64 {
    x * tanh_of_softplus(x)
}

/// `tanh(softplus(x))` in closed form: with `u = e^x`,
/// `tanh(ln(1+u)) = (u^2 + 2u) / (u^2 + 2u + 2)`.
#[inline]
fn tanh_of_softplus(x: f64) -> f64 {
    if x > SOFTPLUS_CUTOFF {
        // 1 - 2/(u^2+2u+2) with u huge
        return 1.0 - 2.0 * (-2.0 * x).exp();
    }
    let u = x.exp();
    let n = u * (u + 2.0);
    n / (n + 2.0)
}

#[inline]
fn mish_derivative(x: f64) -> f64 {
    // d/dx [x tanh(sp(x))] = tanh(sp) + x * sech^2(sp) * sigmoid(x)
    let t = tanh_of_softplus(x);
    t + x * (1.0 - t * t) * sigmoid(x)
}
