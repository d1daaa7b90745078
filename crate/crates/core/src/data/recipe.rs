use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Deserialize;

use super::{DataError, LabeledDataset};

/// How to turn one CSV export into a [`LabeledDataset`].
///
/// Recipes are TOML files:
///
/// ```toml
/// csv = "hogzilla.csv"          # relative to the recipe file
/// label_column = "class"
/// drop_columns = ["flow_id"]
/// correlation_threshold = 0.5
/// scale = true
///
/// [labels]                      # class name = raw labels; order = encoding
/// Acceptable = ["Acceptable", "Safe"]
/// Unrated = ["Unrated", "Fun"]
/// Unsafe = ["Unsafe", "Dangerous"]
///
/// [expected_counts]             # optional sanity check, warns on mismatch
/// Unrated = 5657
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecipe {
    #[serde(default)]
    pub name: Option<String>,
    pub csv: PathBuf,
    pub label_column: String,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default = "default_threshold")]
    pub correlation_threshold: f64,
    #[serde(default = "default_true")]
    pub scale: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub labels: IndexMap<String, Vec<String>>,
    #[serde(default)]
    pub expected_counts: IndexMap<String, usize>,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> char {
    ','
}

impl DatasetRecipe {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let recipe: Self = toml::from_str(text).map_err(|e| DataError::Recipe(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }

    /// Reads a recipe and resolves its `csv` path against the recipe's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut recipe = Self::parse(&text)?;
        if recipe.csv.is_relative() {
            if let Some(dir) = path.parent() {
                recipe.csv = dir.join(&recipe.csv);
            }
        }
        if recipe.name.is_none() {
            recipe.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(recipe)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(0.0..=1.0).contains(&self.correlation_threshold) {
            return Err(DataError::Recipe(format!(
                "correlation_threshold {} is outside [0, 1]",
                self.correlation_threshold
            )));
        }
        if self.labels.is_empty() {
            return Err(DataError::Recipe("empty [labels] mapping".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for raws in self.labels.values() {
            for raw in raws {
                if !seen.insert(raw.trim()) {
                    return Err(DataError::Recipe(format!(
                        "raw label `{raw}` is mapped to more than one class"
                    )));
                }
            }
        }
        for class in self.expected_counts.keys() {
            if !self.labels.contains_key(class) {
                return Err(DataError::Recipe(format!(
                    "expected_counts names unknown class `{class}`"
                )));
            }
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        self.labels.keys().cloned().collect()
    }

    /// Class index for a raw label string.
    pub fn encode(&self, raw: &str) -> Option<usize> {
        let raw = raw.trim();
        self.labels
            .values()
            .position(|raws| raws.iter().any(|r| r.trim() == raw))
    }

    /// Differences between the loaded class counts and `expected_counts`.
    pub fn count_mismatches(&self, dataset: &LabeledDataset) -> Vec<String> {
        let counts = dataset.class_counts();
        self.expected_counts
            .iter()
            .filter_map(|(class, &expected)| {
                let idx = self.labels.get_index_of(class)?;
                let got = counts.get(idx).copied().unwrap_or(0);
                (got != expected).then(|| format!("{class}: expected {expected}, found {got}"))
            })
            .collect()
    }
}
