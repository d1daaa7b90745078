use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::activation::ActivationKind;
use crate::data::PrepareOptions;
use crate::nn::{AdamConfig, Head, ModelSpec, OutputLayer, TrainConfig};
use crate::smote::{SamplingStrategy, SmoteConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Table,
    Jsonl,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Table => "txt",
            Self::Jsonl => "jsonl",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "table" | "text" => Ok(Self::Table),
            "jsonl" | "json-lines" => Ok(Self::Jsonl),
            other => Err(format!("unknown report format `{other}` (csv, table, jsonl)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Table => "table",
            Self::Jsonl => "jsonl",
        })
    }
}

/// Output layer choice; `auto` means sigmoid for two classes, softmax otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputChoice {
    #[default]
    Auto,
    Softmax,
    Sigmoid,
}

/// Layer sizes that differ from the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub conv_filters: Option<usize>,
    pub conv_kernel: Option<usize>,
    pub pool_size: Option<usize>,
    pub gru_units: Option<usize>,
    pub dense_units: Option<usize>,
    pub head: Option<Head>,
    #[serde(default)]
    pub output: OutputChoice,
}

/// Gaussian-blob data used instead of a recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub rows_per_class: usize,
    #[serde(default = "default_synth_features")]
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_synth_features() -> usize {
    8
}

/// One experiment: a data source plus training and comparison settings.
///
/// ```toml
/// recipe = "../recipes/hogzilla.toml"
/// activations = ["mish", "relu"]
/// seeds = [1, 2, 3]
/// epochs = 100
/// output_dir = "runs/hogzilla"
///
/// [model]
/// gru_units = 32
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub recipe: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default = "default_activations")]
    pub activations: Vec<ActivationKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default = "default_true")]
    pub smote: bool,
    #[serde(default = "default_k")]
    pub smote_k: usize,
    #[serde(default = "default_split_seed")]
    pub smote_seed: u64,
    /// Per-class targets; absent means every class grows to the majority count.
    #[serde(default)]
    pub smote_targets: Option<Vec<usize>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default)]
    pub model: ModelOverrides,
}

fn default_activations() -> Vec<ActivationKind> {
    vec![ActivationKind::Mish, ActivationKind::ReLU]
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_epochs() -> usize {
    TrainConfig::default().epochs
}
fn default_batch() -> usize {
    TrainConfig::default().batch_size
}
fn default_lr() -> f64 {
    AdamConfig::default().lr
}
fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_epsilon() -> f64 {
    AdamConfig::default().epsilon
}
fn default_test_fraction() -> f64 {
    PrepareOptions::default().test_fraction
}
fn default_split_seed() -> u64 {
    PrepareOptions::default().split_seed
}
fn default_true() -> bool {
    true
}
fn default_k() -> usize {
    SmoteConfig::default().k
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub no_smote: bool,
    pub format: Option<ReportFormat>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config for in-memory synthetic data with every other field at its default.
    pub fn synthetic(source: SyntheticSource) -> Self {
        let mut cfg: Self = toml::from_str("").expect("defaults deserialize");
        cfg.synthetic = Some(source);
        cfg
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; `recipe` and `output_dir` are resolved against
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        if let Some(r) = &cfg.recipe {
            if r.is_relative() {
                cfg.recipe = Some(dir.join(r));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = dir.join(&cfg.output_dir);
        }
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(e) = o.epochs {
            self.epochs = e;
        }
        if let Some(b) = o.batch_size {
            self.batch_size = b;
        }
        if let Some(lr) = o.learning_rate {
            self.learning_rate = lr;
        }
        if o.no_smote {
            self.smote = false;
        }
        if let Some(f) = o.format {
            self.format = f;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        match (&self.recipe, &self.synthetic) {
            (None, None) => return err("either `recipe` or a [synthetic] table is required".into()),
            (Some(_), Some(_)) => return err("`recipe` and [synthetic] are mutually exclusive".into()),
            _ => {}
        }
        if self.activations.is_empty() {
            return err("`activations` must not be empty".into());
        }
        if self.seeds.is_empty() {
            return err("`seeds` must not be empty".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return err("`epochs` and `batch_size` must be positive".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return err(format!("test_fraction {} must lie in (0, 1)", self.test_fraction));
        }
        if self.smote_k == 0 {
            return err("`smote_k` must be at least 1".into());
        }
        self.train_config().adam.validate().map_err(ExperimentError::Config)?;
        if let Some(s) = &self.synthetic {
            if s.rows_per_class == 0 || s.features == 0 || s.classes == 0 {
                return err("synthetic rows_per_class, features and classes must be positive".into());
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
        }
    }

    pub fn smote_config(&self) -> Option<SmoteConfig> {
        self.smote.then(|| SmoteConfig {
            k: self.smote_k,
            strategy: match &self.smote_targets {
                Some(t) => SamplingStrategy::Targets(t.clone()),
                None => SamplingStrategy::MatchMajority,
            },
            seed: self.smote_seed,
        })
    }

    pub fn prepare_options(&self) -> PrepareOptions {
        PrepareOptions {
            test_fraction: self.test_fraction,
            split_seed: self.split_seed,
            smote: self.smote_config(),
        }
    }

    /// Default layer sizes with this config's overrides applied.
    pub fn model_spec(&self, input_len: usize, classes: usize, activation: ActivationKind) -> ModelSpec {
        let output = match self.model.output {
            OutputChoice::Auto => OutputLayer::for_classes(classes),
            OutputChoice::Softmax => OutputLayer::Softmax { classes },
            OutputChoice::Sigmoid => OutputLayer::Sigmoid,
        };
        let mut spec = ModelSpec::new(input_len, output, activation);
        let m = &self.model;
        spec.conv_filters = m.conv_filters.unwrap_or(spec.conv_filters);
        spec.conv_kernel = m.conv_kernel.unwrap_or(spec.conv_kernel);
        spec.pool_size = m.pool_size.unwrap_or(spec.pool_size);
        spec.gru_units = m.gru_units.unwrap_or(spec.gru_units);
        spec.dense_units = m.dense_units.unwrap_or(spec.dense_units);
        spec.head = m.head.unwrap_or(spec.head);
        spec
    }
}
