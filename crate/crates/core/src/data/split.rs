use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, LabeledDataset};

/// Per-class test counts: `round(n_c * fraction)` clamped to `[1, n_c - 1]`.
pub fn test_counts(class_counts: &[usize], fraction: f64) -> Vec<usize> {
    class_counts
        .iter()
        .map(|&n| ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1)))
        .collect()
}

/// Stratified train/test row indices, each list ascending.
pub fn stratified_split_indices(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() == 1 {
            return Err(DataError::SingletonClass(dataset.class_names[c].clone()));
        }
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let n_test = test_counts(&counts, test_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (mut rows, n) in by_class.into_iter().zip(n_test) {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..n]);
        train.extend_from_slice(&rows[n..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split; rows keep their original relative order.
pub fn stratified_split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DataError> {
    let (train, test) = stratified_split_indices(dataset, test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
