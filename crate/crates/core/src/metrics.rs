//! Confusion matrix and one-vs-rest precision, recall and F1 with macro
//! (unweighted) averaging.
//!
//! Values are kept at full precision; rounding to two decimals happens only
//! in the text renderers.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

/// `counts[t][p]`: samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(MetricsError::Invalid("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<(), MetricsError> {
        let k = self.classes();
        for label in [truth, predicted] {
            if label >= k {
                return Err(MetricsError::LabelOutOfRange { label, classes: k });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    /// Predicted as `c` but belonging elsewhere.
    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.classes()).filter(|&t| t != c).map(|t| self.counts[t][c]).sum()
    }

    /// Belonging to `c` but predicted elsewhere.
    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.classes()).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }

    pub fn true_negatives(&self, c: usize) -> u64 {
        self.total() - self.true_positives(c) - self.false_positives(c) - self.false_negatives(c)
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let s = precision + recall;
    if s == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    /// Macro values are plain means of the per-class values; macro F1 is the
    /// mean of per-class F1, not F1 of the macro precision and recall.
    pub fn from_class_metrics(class_names: Vec<String>, per_class: Vec<ClassMetrics>, accuracy: f64) -> Self {
        Self {
            macro_precision: mean(per_class.iter().map(|m| m.precision)),
            macro_recall: mean(per_class.iter().map(|m| m.recall)),
            macro_f1: mean(per_class.iter().map(|m| m.f1)),
            class_names,
            per_class,
            accuracy,
        }
    }

    /// `(name, value)` for the four summary metrics, in table order.
    pub fn summary(&self) -> [(&'static str, f64); 4] {
        [
            ("precision", self.macro_precision),
            ("recall", self.macro_recall),
            ("f1_score", self.macro_f1),
            ("accuracy", self.accuracy),
        ]
    }

    /// Per-class rows then a `macro` row; values unrounded fractions.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>, rec: [String; 6]| w.write_record(rec).expect("in-memory csv write");
        write(
            &mut w,
            ["row", "class", "precision", "recall", "f1_score", "accuracy"].map(String::from),
        );
        for (i, (name, m)) in self.class_names.iter().zip(&self.per_class).enumerate() {
            write(
                &mut w,
                [
                    i.to_string(),
                    name.clone(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f1.to_string(),
                    String::new(),
                ],
            );
        }
        write(
            &mut w,
            [
                "macro".into(),
                String::new(),
                self.macro_precision.to_string(),
                self.macro_recall.to_string(),
                self.macro_f1.to_string(),
                self.accuracy.to_string(),
            ],
        );
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
    }

    /// Aligned text: per-class rows, then the accuracy and macro row.
    pub fn to_table(&self) -> String {
        let mut rows = vec![[
            "Num".to_string(),
            "Class".into(),
            "Precision".into(),
            "Recall".into(),
            "F1-Score".into(),
        ]];
        for (i, (name, m)) in self.class_names.iter().zip(&self.per_class).enumerate() {
            rows.push([
                i.to_string(),
                name.clone(),
                format_percent(m.precision),
                format_percent(m.recall),
                format_percent(m.f1),
            ]);
        }
        rows.push([
            "Metric".into(),
            "Accuracy".into(),
            "Macro Precision".into(),
            "Macro Recall".into(),
            "Macro F1-Score".into(),
        ]);
        rows.push([
            "Value".into(),
            format_percent(self.accuracy),
            format_percent(self.macro_precision),
            format_percent(self.macro_recall),
            format_percent(self.macro_f1),
        ]);
        align(&rows)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}

/// Left-aligns cells into columns separated by two spaces.
pub fn align<const N: usize>(rows: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (j, cell) in row.iter().enumerate() {
            if j + 1 == N {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{cell:<w$}  ", w = widths[j]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// A fraction shown as a percentage with two decimals: `0.98443 -> "98.44%"`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

pub fn report(cm: &ConfusionMatrix, class_names: &[String]) -> Result<EvalReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    if class_names.len() != cm.classes() {
        return Err(MetricsError::Invalid(format!(
            "{} class names for a {}-class matrix",
            class_names.len(),
            cm.classes()
        )));
    }
    let per_class = (0..cm.classes())
        .map(|c| {
            let tp = cm.true_positives(c);
            let precision = ratio(tp, tp + cm.false_positives(c));
            let recall = ratio(tp, tp + cm.false_negatives(c));
            ClassMetrics {
                precision,
                recall,
                f1: f1(precision, recall),
                support: cm.support(c),
            }
        })
        .collect();
    Ok(EvalReport::from_class_metrics(
        class_names.to_vec(),
        per_class,
        ratio(cm.trace(), total),
    ))
}

/// Confusion matrix and report in one call.
pub fn evaluate(
    truth: &[usize],
    predicted: &[usize],
    class_names: &[String],
) -> Result<(ConfusionMatrix, EvalReport), MetricsError> {
    let cm = confusion(truth, predicted, class_names.len())?;
    let r = report(&cm, class_names)?;
    Ok((cm, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1], vec![0, 1]]);
        assert_eq!(confusion(&[], &[], 3).unwrap(), ConfusionMatrix::zeros(3));
        let diag = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(diag.trace(), 4);
        assert_eq!(diag.total(), 4);
        assert!(matches!(
            confusion(&[0], &[3], 2),
            Err(MetricsError::LabelOutOfRange { label: 3, .. })
        ));
        assert!(confusion(&[0], &[], 2).is_err());
    }

    #[test]
    fn binary_hand_computed() {
        let cm = ConfusionMatrix::from_counts(vec![vec![1, 1], vec![0, 1]]).unwrap();
        let r = report(&cm, &names(2)).unwrap();
        assert_eq!(r.per_class[0].precision, 1.0);
        assert_eq!(r.per_class[0].recall, 0.5);
        assert_eq!(r.per_class[1].precision, 0.5);
        assert_eq!(r.per_class[1].recall, 1.0);
        assert_eq!(r.accuracy, 2.0 / 3.0);
        assert_eq!(cm.true_negatives(0), 1);
    }

    #[test]
    fn perfect_and_empty() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        let r = report(&cm, &names(3)).unwrap();
        for (_, v) in r.summary() {
            assert_eq!(v, 1.0);
        }
        assert_eq!(report(&ConfusionMatrix::zeros(2), &names(2)), Err(MetricsError::Empty));
    }

    #[test]
    fn zero_denominators_give_zero() {
        // class 1 never predicted and never present
        let cm = confusion(&[0, 0], &[0, 0], 2).unwrap();
        let r = report(&cm, &names(2)).unwrap();
        assert_eq!(
            r.per_class[1],
            ClassMetrics {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                support: 0
            }
        );
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn renderers() {
        let cm = ConfusionMatrix::from_counts(vec![vec![1, 1], vec![0, 1]]).unwrap();
        let r = report(&cm, &["SAFE".into(), "UN,SAFE".into()]).unwrap();
        let csv = r.to_csv();
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(&rows[1][1], "UN,SAFE");
        assert_eq!(rows[2][5].parse::<f64>().unwrap(), r.accuracy);
        assert_eq!(rows[2][4].parse::<f64>().unwrap(), r.macro_f1);
        let table = r.to_table();
        assert!(table.contains("66.67%"), "{table}");
        let json: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(json["accuracy"].as_f64().unwrap(), r.accuracy);
        assert_eq!(format_percent(0.984433), "98.44%");
    }

    /// Recounts every quantity straight from the label vectors.
    fn brute_force(truth: &[usize], pred: &[usize], k: usize) -> (Vec<(f64, f64, f64)>, f64) {
        let per = (0..k)
            .map(|c| {
                let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
                let pp = pred.iter().filter(|&&p| p == c).count() as f64;
                let ap = truth.iter().filter(|&&t| t == c).count() as f64;
                let p = if pp == 0.0 { 0.0 } else { tp / pp };
                let r = if ap == 0.0 { 0.0 } else { tp / ap };
                let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
                (p, r, f)
            })
            .collect();
        let acc = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64;
        (per, acc)
    }

    fn labels() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..5).prop_flat_map(|k| (Just(k), prop::collection::vec((0..k, 0..k), 1..60)))
    }

    proptest! {
        #[test]
        fn matches_brute_force((k, pairs) in labels()) {
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let (_, r) = evaluate(&truth, &pred, &names(k)).unwrap();
            let (per, acc) = brute_force(&truth, &pred, k);
            prop_assert!((r.accuracy - acc).abs() < 1e-15);
            for (m, (p, rc, f)) in r.per_class.iter().zip(&per) {
                prop_assert!((m.precision - p).abs() < 1e-15);
                prop_assert!((m.recall - rc).abs() < 1e-15);
                prop_assert!((m.f1 - f).abs() < 1e-15);
            }
            let mean_f1 = per.iter().map(|x| x.2).sum::<f64>() / k as f64;
            prop_assert!((r.macro_f1 - mean_f1).abs() < 1e-15);
            for (_, v) in r.summary() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn relabelling_permutes_rows((k, pairs) in labels(), shift in 1usize..4) {
            let perm = |c: usize| (c + shift) % k;
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let (_, a) = evaluate(&truth, &pred, &names(k)).unwrap();
            let t2: Vec<usize> = truth.iter().map(|&c| perm(c)).collect();
            let p2: Vec<usize> = pred.iter().map(|&c| perm(c)).collect();
            let (_, b) = evaluate(&t2, &p2, &names(k)).unwrap();
            for c in 0..k {
                prop_assert_eq!(a.per_class[c], b.per_class[perm(c)]);
            }
            prop_assert!((a.macro_precision - b.macro_precision).abs() < 1e-12);
            prop_assert!((a.macro_recall - b.macro_recall).abs() < 1e-12);
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }
    }
}
