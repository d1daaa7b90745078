//! The CNN-BiGRU engine: layers, model, losses, gradients, Adam and the
//! model file format.

pub mod adam;
pub mod io;
pub mod layers;
pub mod model;
pub mod params;
pub mod spec;
pub mod train;

use thiserror::Error;

use crate::activation::ActivationError;
use crate::tensor::ShapeError;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{bigru_forward, conv1d_forward, dense_forward, global_average_pool, maxpool1d_forward};
pub use model::{backward, binary_cross_entropy, cross_entropy_loss, model_forward, model_loss, Gradients, Model};
pub use params::{BiGruParams, DenseParams, GruCell, ModelParams, Parameters};
pub use spec::{Head, ModelSpec, OutputLayer};
pub use train::{train, LossTrace, TrainConfig, TrainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Activation(#[from] ActivationError),
    #[error("{0}")]
    Domain(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
