//! Synthetic minority oversampling.
//!
//! A synthetic row is `x_i + λ (x_ni - x_i)` where `x_ni` is one of the `k`
//! nearest same-class neighbours of `x_i` and `λ` is uniform in `[0, 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoteError {
    #[error("class `{0}` has a single row; SMOTE needs at least two to interpolate")]
    SingletonClass(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("need at least two points for a neighbour search, got {0}")]
    TooFewPoints(usize),
    #[error("query index {index} out of range for {len} points")]
    QueryOutOfRange { index: usize, len: usize },
    #[error("vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("lambda {0} is outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("invalid sampling targets: {0}")]
    InvalidTargets(String),
}

/// How many rows each class should have after resampling.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Every class grows to the majority-class count.
    #[default]
    MatchMajority,
    /// Explicit per-class targets, indexed by class.
    Targets(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    pub strategy: SamplingStrategy,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k: 5,
            strategy: SamplingStrategy::MatchMajority,
            seed: 42,
        }
    }
}

impl SmoteConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Target row count per class for the given current counts.
    pub fn targets(&self, counts: &[usize]) -> Result<Vec<usize>, SmoteError> {
        if self.k == 0 {
            return Err(SmoteError::ZeroK);
        }
        match &self.strategy {
            SamplingStrategy::MatchMajority => {
                let max = counts.iter().copied().max().unwrap_or(0);
                Ok(counts.iter().map(|&c| if c == 0 { 0 } else { max }).collect())
            }
            SamplingStrategy::Targets(t) => {
                if t.len() != counts.len() {
                    return Err(SmoteError::InvalidTargets(format!(
                        "{} targets for {} classes",
                        t.len(),
                        counts.len()
                    )));
                }
                for (c, (&want, &have)) in t.iter().zip(counts).enumerate() {
                    if want < have {
                        return Err(SmoteError::InvalidTargets(format!(
                            "class {c}: target {want} is below the current count {have}"
                        )));
                    }
                    if have == 0 && want > 0 {
                        return Err(SmoteError::InvalidTargets(format!(
                            "class {c} has no rows to oversample"
                        )));
                    }
                }
                Ok(t.clone())
            }
        }
    }
}

/// One generated row with the provenance needed to reconstruct it.
/// Indices refer to rows of the input dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub source_index: usize,
    pub neighbor_index: usize,
    pub lambda: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` points nearest to `points[query]` (Euclidean), the
/// query excluded. `k` is capped at `points.len() - 1`; ties go to the lower
/// index. All points are assumed to belong to one class.
pub fn knn_same_class(points: &[Vec<f64>], query: usize, k: usize) -> Result<Vec<usize>, SmoteError> {
    if k == 0 {
        return Err(SmoteError::ZeroK);
    }
    if points.len() < 2 {
        return Err(SmoteError::TooFewPoints(points.len()));
    }
    if query >= points.len() {
        return Err(SmoteError::QueryOutOfRange {
            index: query,
            len: points.len(),
        });
    }
    Ok(knn_unchecked(points, query, k))
}

fn knn_unchecked(points: &[Vec<f64>], query: usize, k: usize) -> Vec<usize> {
    let q = &points[query];
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, p)| (sq_dist(q, p), i))
        .collect();
    let k = k.min(d.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

/// `x_i + λ (x_ni - x_i)`, componentwise.
pub fn synthesize(x_i: &[f64], x_ni: &[f64], lambda: f64) -> Result<Vec<f64>, SmoteError> {
    if x_i.len() != x_ni.len() {
        return Err(SmoteError::LengthMismatch(x_i.len(), x_ni.len()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SmoteError::LambdaOutOfRange(lambda));
    }
    Ok(interpolate(x_i, x_ni, lambda))
}

fn interpolate(x_i: &[f64], x_ni: &[f64], lambda: f64) -> Vec<f64> {
    x_i.iter().zip(x_ni).map(|(a, b)| a + lambda * (b - a)).collect()
}

/// Oversamples minority classes. The returned dataset holds the input rows
/// unchanged, followed by the synthetic rows grouped by class.
pub fn resample(dataset: &LabeledDataset, config: &SmoteConfig) -> Result<LabeledDataset, SmoteError> {
    Ok(resample_detailed(dataset, config)?.0)
}

/// [`resample`] plus the provenance of every synthetic row.
pub fn resample_detailed(
    dataset: &LabeledDataset,
    config: &SmoteConfig,
) -> Result<(LabeledDataset, Vec<SyntheticSample>), SmoteError> {
    let counts = dataset.class_counts();
    let targets = config.targets(&counts)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for (i, &l) in dataset.labels.iter().enumerate() {
        members[l].push(i);
    }
    for (c, (&want, &have)) in targets.iter().zip(&counts).enumerate() {
        if want > have && have < 2 {
            return Err(SmoteError::SingletonClass(dataset.class_names[c].clone()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut synthetic = Vec::new();
    for (c, rows) in members.iter().enumerate() {
        let need = targets[c] - counts[c];
        if need == 0 {
            continue;
        }
        let points: Vec<Vec<f64>> = rows.iter().map(|&i| dataset.features[i].clone()).collect();
        // neighbour lists are computed lazily; most sources repeat for large deficits
        let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; points.len()];
        for _ in 0..need {
            let s = rng.random_range(0..points.len());
            let nn = neighbours[s].get_or_insert_with(|| knn_unchecked(&points, s, config.k));
            let n = nn[rng.random_range(0..nn.len())];
            let lambda: f64 = rng.random();
            synthetic.push(SyntheticSample {
                features: interpolate(&points[s], &points[n], lambda),
                label: c,
                source_index: rows[s],
                neighbor_index: rows[n],
                lambda,
            });
        }
    }

    let mut out = dataset.clone();
    out.features.extend(synthetic.iter().map(|s| s.features.clone()));
    out.labels.extend(synthetic.iter().map(|s| s.label));
    Ok((out, synthetic))
}
