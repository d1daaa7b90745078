//! A small neural-network framework and experiment pipeline for comparing
//! activation functions inside a CNN-BiGRU intrusion-detection model.
//!
//! Modules:
//! - [`activation`]: the activation zoo, derivatives and softmax
//! - [`nn`]: tensors, layers, backpropagation, Adam, model files, training
//! - [`smote`]: synthetic minority oversampling
//! - [`data`]: CSV ingestion, scaling, Pearson selection, splits, fixtures
//! - [`metrics`]: confusion matrix and macro-averaged metrics
//! - [`experiment`]: end-to-end runs, activation comparisons and reports

pub mod activation;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod smote;
pub mod tensor;

pub use activation::{activate, activate_grad, softmax, ActivationKind};
pub use tensor::Tensor;
