//! End-to-end runs: preprocess, train, evaluate and compare activations.
//!
//! [`compare`] prepares the data once, so every activation sees the same
//! split and the same SMOTE output; only the activation and seed vary.

pub mod config;
pub mod report;
pub mod run;

use std::path::Path;

use thiserror::Error;

use crate::data::DataError;
use crate::metrics::MetricsError;
use crate::nn::io::ModelFileError;

pub use config::{ExperimentConfig, ModelOverrides, OutputChoice, Overrides, ReportFormat, SyntheticSource};
pub use report::{emit_report, render_eval, ActivationResult, ComparisonReport, DifferenceRow, MetricSummary, SeedRun};
pub use run::{
    compare, compare_prepared, dataset_name, evaluate_model, load_data, persist_run, run_prepared, run_single,
    RunOutcome,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{activation} (seed {seed}) diverged in epoch {epoch}: non-finite loss")]
    Divergence {
        activation: String,
        seed: u64,
        epoch: usize,
    },
    #[error("training failed: {0}")]
    Train(String),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status: 1 for configuration problems, 2 for data and
    /// file problems, 3 for training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
