use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, LabeledDataset};

/// `K` unit-variance Gaussian blobs. Class `c` is centred at
/// `c * separation / sqrt(d)` on every coordinate, so neighbouring class
/// means are exactly `separation` apart.
///
/// Rows are grouped by class: all of class 0, then class 1, and so on.
pub fn generate_synthetic(
    n_per_class: usize,
    n_features: usize,
    n_classes: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset, DataError> {
    if n_per_class == 0 || n_features == 0 || n_classes == 0 {
        return Err(DataError::Invalid(
            "rows per class, features and classes must all be positive".into(),
        ));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(DataError::Invalid(format!(
            "separation {separation} must be finite and >= 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = separation / (n_features as f64).sqrt();
    let mut features = Vec::with_capacity(n_per_class * n_classes);
    let mut labels = Vec::with_capacity(n_per_class * n_classes);
    for c in 0..n_classes {
        let mean = c as f64 * step;
        for _ in 0..n_per_class {
            let row: Vec<f64> = (0..n_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + z
                })
                .collect();
            features.push(row);
            labels.push(c);
        }
    }
    LabeledDataset::new(
        features,
        labels,
        (0..n_classes).map(|c| format!("class{c}")).collect(),
        (0..n_features).map(|j| format!("f{j}")).collect(),
    )
}
