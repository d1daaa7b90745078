use mishnet::data::LabeledDataset;
use mishnet::smote::{knn_same_class, resample, resample_detailed, synthesize, SamplingStrategy, SmoteConfig};
use proptest::prelude::*;

fn dataset(features: Vec<Vec<f64>>, labels: Vec<usize>, k: usize) -> LabeledDataset {
    let d = features[0].len();
    LabeledDataset::new(
        features,
        labels,
        (0..k).map(|c| format!("c{c}")).collect(),
        (0..d).map(|j| format!("x{j}")).collect(),
    )
    .unwrap()
}

/// All-pairs distances, full sort, first `k`.
fn brute_knn(points: &[Vec<f64>], q: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..points.len())
        .filter(|&i| i != q)
        .map(|i| {
            let s: f64 = points[q].iter().zip(&points[i]).map(|(a, b)| (a - b).powi(2)).sum();
            (s.sqrt(), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Rows per class between 2 and 30, three classes, three features.
fn arb_dataset() -> impl Strategy<Value = LabeledDataset> {
    prop::collection::vec(2usize..30, 3).prop_flat_map(|counts| {
        let n: usize = counts.iter().sum();
        prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), n).prop_map(move |rows| {
            let labels = counts
                .iter()
                .enumerate()
                .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
                .collect();
            dataset(rows, labels, 3)
        })
    })
}

fn bounding_box(ds: &LabeledDataset, class: usize) -> (Vec<f64>, Vec<f64>) {
    let d = ds.n_features();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (row, _) in ds.features.iter().zip(&ds.labels).filter(|(_, &l)| l == class) {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn knn_matches_brute_force(
        pts in prop::collection::vec(prop::collection::vec(-5i32..5, 2), 2..25),
        q in any::<prop::sample::Index>(),
        k in 1usize..8,
    ) {
        // small integer grid, so exact ties are common
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
        let q = q.index(pts.len());
        prop_assert_eq!(knn_same_class(&pts, q, k).unwrap(), brute_knn(&pts, q, k));
    }

    #[test]
    fn synthetic_rows_reconstruct_and_stay_in_the_box(ds in arb_dataset(), seed in any::<u64>(), k in 1usize..7) {
        let cfg = SmoteConfig { k, strategy: SamplingStrategy::MatchMajority, seed };
        let (out, syn) = resample_detailed(&ds, &cfg).unwrap();
        let max = *ds.class_counts().iter().max().unwrap();
        prop_assert_eq!(out.class_counts(), vec![max; 3]);
        prop_assert_eq!(&out.features[..ds.n_rows()], &ds.features[..]);
        prop_assert_eq!(&out.labels[..ds.n_rows()], &ds.labels[..]);
        prop_assert_eq!(syn.len(), out.n_rows() - ds.n_rows());
        let boxes: Vec<_> = (0..3).map(|c| bounding_box(&ds, c)).collect();
        for (s, row) in syn.iter().zip(&out.features[ds.n_rows()..]) {
            prop_assert_eq!(&s.features, row);
            prop_assert_eq!(ds.labels[s.source_index], s.label);
            prop_assert_eq!(ds.labels[s.neighbor_index], s.label);
            prop_assert!(s.source_index != s.neighbor_index);
            prop_assert!((0.0..=1.0).contains(&s.lambda));
            let a = &ds.features[s.source_index];
            let b = &ds.features[s.neighbor_index];
            for j in 0..a.len() {
                prop_assert!((a[j] + s.lambda * (b[j] - a[j]) - row[j]).abs() <= 1e-12);
            }
            let (lo, hi) = &boxes[s.label];
            for j in 0..row.len() {
                prop_assert!(lo[j] <= row[j] && row[j] <= hi[j]);
            }
        }
        prop_assert_eq!(resample(&ds, &cfg).unwrap(), out);
    }

    #[test]
    fn histogram_equals_explicit_targets(ds in arb_dataset(), extra in prop::collection::vec(0usize..40, 3), seed in any::<u64>()) {
        let targets: Vec<usize> = ds.class_counts().iter().zip(&extra).map(|(c, e)| c + e).collect();
        let cfg = SmoteConfig { k: 5, strategy: SamplingStrategy::Targets(targets.clone()), seed };
        prop_assert_eq!(resample(&ds, &cfg).unwrap().class_counts(), targets);
    }

    #[test]
    fn two_point_minority_stays_on_the_segment(
        a in prop::collection::vec(-100.0f64..100.0, 4),
        b in prop::collection::vec(-100.0f64..100.0, 4),
        seed in any::<u64>(),
    ) {
        prop_assume!(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() > 1e-6);
        let mut rows = vec![a.clone(), b.clone()];
        rows.extend((0..12).map(|i| vec![i as f64; 4]));
        let mut labels = vec![1, 1];
        labels.extend(std::iter::repeat_n(0, 12));
        let ds = dataset(rows, labels, 2);
        let (out, syn) = resample_detailed(&ds, &SmoteConfig::with_seed(seed)).unwrap();
        prop_assert_eq!(out.class_counts(), vec![12, 12]);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        let ab2: f64 = ab.iter().map(|v| v * v).sum();
        for s in &syn {
            // least-squares lambda for s = a + t (b - a), then the residual
            let t: f64 = s.features.iter().zip(&a).zip(&ab).map(|((p, x), d)| (p - x) * d).sum::<f64>() / ab2;
            let resid: f64 = s.features.iter().zip(&a).zip(&ab)
                .map(|((p, x), d)| (p - x - t * d).powi(2)).sum::<f64>().sqrt();
            prop_assert!(resid < 1e-9, "residual {}", resid);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&t));
        }
    }
}

#[test]
fn same_seed_same_output_other_seed_differs() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
    let labels = (0..20).map(|i| usize::from(i >= 16)).collect();
    let ds = dataset(rows, labels, 2);
    let a = resample(&ds, &SmoteConfig::with_seed(1)).unwrap();
    assert_eq!(a, resample(&ds, &SmoteConfig::with_seed(1)).unwrap());
    assert_ne!(a, resample(&ds, &SmoteConfig::with_seed(2)).unwrap());
}

#[test]
fn synthesize_endpoints_are_exact() {
    let a = [0.1, -7.25, 3.0];
    let b = [2.5, 1.0, -3.0];
    assert_eq!(synthesize(&a, &b, 0.0).unwrap(), a);
    assert_eq!(synthesize(&a, &b, 1.0).unwrap(), b);
}
