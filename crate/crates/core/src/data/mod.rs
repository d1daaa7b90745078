//! Data ingestion and preprocessing.
//!
//! The pipeline order is fixed: load, standard-scale, Pearson feature
//! selection, stratified split, then SMOTE on the training split only.
//! [`pipeline::prepare`] is the one place that strings the steps together.

pub mod csv_io;
pub mod pipeline;
pub mod recipe;
pub mod split;
pub mod synth;
pub mod transform;

use std::collections::HashSet;

use thiserror::Error;

use crate::smote::SmoteError;

pub use csv_io::{load_csv, load_csv_from_reader, read_prepared_csv, save_prepared_csv, write_prepared_csv};
pub use pipeline::{prepare, prepare_dataset, PipelineStep, PrepareOptions, PreparedData};
pub use recipe::DatasetRecipe;
pub use split::{stratified_split, stratified_split_indices, test_counts};
pub use synth::generate_synthetic;
pub use transform::{pearson, pearson_select, standard_scale, FeatureSelection, Scaler};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("recipe error: {0}")]
    Recipe(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("labels without a class mapping: {}", .0.join(", "))]
    UnknownLabels(Vec<String>),
    #[error("no numeric attribute columns")]
    NoNumericColumns,
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    Unparseable { row: usize, column: String, value: String },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("class `{0}` has a single row and cannot be split or oversampled")]
    SingletonClass(String),
    #[error("no feature has |r| > {threshold} with the label")]
    NoFeaturesSelected { threshold: f64 },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Smote(#[from] SmoteError),
}

/// Feature matrix with integer class labels and the names for both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let ds = Self {
            features,
            labels,
            class_names,
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.features.len() != self.labels.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let width = self.feature_names.len();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != width {
                return Err(DataError::Invalid(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Invalid(format!("row {i} holds a non-finite value")));
            }
        }
        let k = self.class_names.len();
        if let Some(bad) = self.labels.iter().find(|&&l| l >= k) {
            return Err(DataError::Invalid(format!("label {bad} with {k} classes")));
        }
        let unique: HashSet<&String> = self.class_names.iter().collect();
        if unique.len() != k {
            return Err(DataError::Invalid("duplicate class names".into()));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            features: self
                .features
                .iter()
                .map(|row| columns.iter().map(|&c| row[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }
}
