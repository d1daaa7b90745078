use serde::Serialize;

use super::{DataError, LabeledDataset};

/// Columns whose population standard deviation falls below this are treated
/// as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Per-feature statistics used by [`standard_scale`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Constant columns; these map to all zeros.
    pub degenerate: Vec<bool>,
}

impl Scaler {
    pub fn fit(dataset: &LabeledDataset) -> Result<Self, DataError> {
        let n = dataset.n_rows();
        if n < 2 {
            return Err(DataError::TooFewRows { needed: 2, got: n });
        }
        let d = dataset.n_features();
        let mut means = vec![0.0; d];
        for row in &dataset.features {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = vec![0.0; d];
        for row in &dataset.features {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|s| (s / n as f64).sqrt()).collect();
        let degenerate = stds.iter().map(|&s| s < DEGENERATE_STD).collect();
        Ok(Self {
            means,
            stds,
            degenerate,
        })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.degenerate[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, dataset: &LabeledDataset) -> LabeledDataset {
        LabeledDataset {
            features: dataset.features.iter().map(|r| self.transform_row(r)).collect(),
            ..dataset.clone()
        }
    }
}

/// Standardises every feature to zero mean and unit population variance.
pub fn standard_scale(dataset: &LabeledDataset) -> Result<(LabeledDataset, Scaler), DataError> {
    let scaler = Scaler::fit(dataset)?;
    Ok((scaler.transform(dataset), scaler))
}

/// Pearson correlation coefficient; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    // relative guard: sums of squares this small are rounding noise
    if denom == 0.0 || sxx <= f64::EPSILON * n as f64 * mx * mx || syy == 0.0 {
        return 0.0;
    }
    (sxy / denom).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSelection {
    pub threshold: f64,
    /// Indices into the input's feature columns, ascending.
    pub kept: Vec<usize>,
    pub kept_names: Vec<String>,
    /// Correlation of every input column with the encoded label.
    pub correlations: Vec<f64>,
}

/// Keeps features whose |Pearson r| with the integer-encoded label exceeds
/// `threshold`, preserving column order.
pub fn pearson_select(
    dataset: &LabeledDataset,
    threshold: f64,
) -> Result<(LabeledDataset, FeatureSelection), DataError> {
    let y: Vec<f64> = dataset.labels.iter().map(|&l| l as f64).collect();
    let correlations: Vec<f64> = (0..dataset.n_features())
        .map(|j| pearson(&dataset.column(j), &y))
        .collect();
    let kept: Vec<usize> = correlations
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() > threshold)
        .map(|(j, _)| j)
        .collect();
    if kept.is_empty() {
        return Err(DataError::NoFeaturesSelected { threshold });
    }
    let selected = dataset.select_columns(&kept);
    let selection = FeatureSelection {
        threshold,
        kept_names: selected.feature_names.clone(),
        kept,
        correlations,
    };
    Ok((selected, selection))
}
