use std::fmt;

use log::info;
use serde::Serialize;

use super::csv_io::load_csv;
use super::recipe::DatasetRecipe;
use super::split::stratified_split;
use super::transform::{pearson_select, standard_scale, FeatureSelection, Scaler};
use super::{DataError, LabeledDataset};
use crate::smote::{resample, SmoteConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStep {
    Load,
    Scale,
    Select,
    Split,
    Smote,
}

impl fmt::Display for PipelineStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Load => "load",
            Self::Scale => "scale",
            Self::Select => "select",
            Self::Split => "split",
            Self::Smote => "smote",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub test_fraction: f64,
    pub split_seed: u64,
    /// `None` disables oversampling.
    pub smote: Option<SmoteConfig>,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            split_seed: 42,
            smote: Some(SmoteConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Steps in the order they ran; skipped steps are absent.
    pub steps: Vec<PipelineStep>,
    pub scaler: Option<Scaler>,
    pub selection: Option<FeatureSelection>,
    /// Rows SMOTE appended to the training split.
    pub synthetic_rows: usize,
}

impl PreparedData {
    /// Steps, class counts and the selected features as JSON.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "steps": self.steps,
            "class_names": self.train.class_names,
            "features": self.train.feature_names,
            "train_counts": self.train.class_counts(),
            "test_counts": self.test.class_counts(),
            "synthetic_rows": self.synthetic_rows,
            "selection": self.selection,
            "scaler": self.scaler,
        })
    }
}

/// Loads the recipe's CSV and runs the full preprocessing chain.
pub fn prepare(recipe: &DatasetRecipe, options: &PrepareOptions) -> Result<PreparedData, DataError> {
    let raw = load_csv(recipe)?;
    info!(
        "loaded {} rows x {} numeric columns, class counts {:?}",
        raw.n_rows(),
        raw.n_features(),
        raw.class_counts()
    );
    let mut prepared = prepare_dataset(raw, recipe.scale, Some(recipe.correlation_threshold), options)?;
    prepared.steps.insert(0, PipelineStep::Load);
    Ok(prepared)
}

/// Scale, select, split and oversample an already loaded dataset, in that
/// order. SMOTE only ever sees the training split.
pub fn prepare_dataset(
    raw: LabeledDataset,
    scale: bool,
    threshold: Option<f64>,
    options: &PrepareOptions,
) -> Result<PreparedData, DataError> {
    let mut steps = Vec::new();
    let mut ds = raw;
    let mut scaler = None;
    if scale {
        let (scaled, s) = standard_scale(&ds)?;
        ds = scaled;
        scaler = Some(s);
        steps.push(PipelineStep::Scale);
    }
    let mut selection = None;
    if let Some(t) = threshold {
        let (selected, sel) = pearson_select(&ds, t)?;
        info!(
            "pearson selection kept {} of {} features",
            sel.kept.len(),
            ds.n_features()
        );
        ds = selected;
        selection = Some(sel);
        steps.push(PipelineStep::Select);
    }
    let (mut train, test) = stratified_split(&ds, options.test_fraction, options.split_seed)?;
    steps.push(PipelineStep::Split);
    let mut synthetic_rows = 0;
    if let Some(cfg) = &options.smote {
        let before = train.n_rows();
        train = resample(&train, cfg)?;
        synthetic_rows = train.n_rows() - before;
        steps.push(PipelineStep::Smote);
    }
    Ok(PreparedData {
        train,
        test,
        steps,
        scaler,
        selection,
        synthetic_rows,
    })
}
