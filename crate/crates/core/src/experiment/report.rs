use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ReportFormat;
use super::ExperimentError;
use crate::metrics::{align, format_percent, EvalReport};

pub const METRICS: [&str; 4] = ["precision", "recall", "f1_score", "accuracy"];

fn metric_title(metric: &str) -> &'static str {
    match metric {
        "precision" => "Precision",
        "recall" => "Recall",
        "f1_score" => "F1-Score",
        _ => "Accuracy",
    }
}

/// Macro precision, recall, F1 and accuracy as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1_score: f64,
    pub accuracy: f64,
}

impl MetricSummary {
    pub fn of(report: &EvalReport) -> Self {
        Self {
            precision: report.macro_precision,
            recall: report.macro_recall,
            f1_score: report.macro_f1,
            accuracy: report.accuracy,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.precision, self.recall, self.f1_score, self.accuracy]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self {
            precision: v[0],
            recall: v[1],
            f1_score: v[2],
            accuracy: v[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub report: EvalReport,
}

/// Every seed's result for one activation, with mean and range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationResult {
    pub activation: String,
    pub runs: Vec<SeedRun>,
    pub mean: MetricSummary,
    pub min: MetricSummary,
    pub max: MetricSummary,
}

impl ActivationResult {
    pub fn new(activation: impl Into<String>, runs: Vec<SeedRun>) -> Self {
        let values: Vec<[f64; 4]> = runs.iter().map(|r| MetricSummary::of(&r.report).values()).collect();
        let n = values.len().max(1) as f64;
        let mut mean = [0.0; 4];
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for v in &values {
            for j in 0..4 {
                mean[j] += v[j] / n;
                min[j] = min[j].min(v[j]);
                max[j] = max[j].max(v[j]);
            }
        }
        // summing v/n can overshoot the range by an ulp when all values agree
        for j in 0..4 {
            mean[j] = mean[j].clamp(min[j], max[j]);
        }
        Self {
            activation: activation.into(),
            runs,
            mean: MetricSummary::from_values(mean),
            min: MetricSummary::from_values(min),
            max: MetricSummary::from_values(max),
        }
    }
}

/// `value_a - value_b` for one metric, both in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceRow {
    pub metric: String,
    pub activation_a: String,
    pub activation_b: String,
    pub value_a: f64,
    pub value_b: f64,
    pub difference: f64,
}

impl DifferenceRow {
    pub fn new(metric: &str, activation_a: &str, activation_b: &str, value_a: f64, value_b: f64) -> Self {
        Self {
            metric: metric.to_string(),
            activation_a: activation_a.to_string(),
            activation_b: activation_b.to_string(),
            value_a,
            value_b,
            difference: value_a - value_b,
        }
    }

    /// Signed, two decimals: `+5.46`.
    pub fn formatted_difference(&self) -> String {
        format_signed(self.difference)
    }
}

/// Two-decimal rendering with an explicit sign; `-0.00` prints as `+0.00`.
pub fn format_signed(v: f64) -> String {
    let s = format!("{v:+.2}");
    if s == "-0.00" {
        "+0.00".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub activations: Vec<ActivationResult>,
    /// For every pair `i < j` of activations, the four metric rows.
    pub differences: Vec<DifferenceRow>,
}

impl ComparisonReport {
    pub fn new(dataset: impl Into<String>, seeds: Vec<u64>, activations: Vec<ActivationResult>) -> Self {
        let mut differences = Vec::new();
        for i in 0..activations.len() {
            for j in i + 1..activations.len() {
                let (a, b) = (&activations[i], &activations[j]);
                for (m, (va, vb)) in METRICS.iter().zip(a.mean.values().iter().zip(b.mean.values())) {
                    differences.push(DifferenceRow::new(
                        m,
                        &a.activation,
                        &b.activation,
                        va * 100.0,
                        vb * 100.0,
                    ));
                }
            }
        }
        Self {
            dataset: dataset.into(),
            seeds,
            activations,
            differences,
        }
    }

    /// Difference rows in the layout of a two-activation summary table.
    pub fn differences_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset",
            "metric",
            "activation_a",
            "activation_b",
            "value_a",
            "value_b",
            "difference",
        ])
        .expect("in-memory csv write");
        for d in &self.differences {
            w.write_record([
                self.dataset.as_str(),
                d.metric.as_str(),
                d.activation_a.as_str(),
                d.activation_b.as_str(),
                &d.value_a.to_string(),
                &d.value_b.to_string(),
                &d.difference.to_string(),
            ])
            .expect("in-memory csv write");
        }
        into_string(w)
    }

    /// Per-seed macro metrics followed by mean, min and max rows per activation.
    pub fn runs_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset",
            "activation",
            "seed",
            "precision",
            "recall",
            "f1_score",
            "accuracy",
        ])
        .expect("in-memory csv write");
        for a in &self.activations {
            let mut rows: Vec<(String, [f64; 4])> = a
                .runs
                .iter()
                .map(|r| (r.seed.to_string(), MetricSummary::of(&r.report).values()))
                .collect();
            rows.push(("mean".into(), a.mean.values()));
            rows.push(("min".into(), a.min.values()));
            rows.push(("max".into(), a.max.values()));
            for (seed, v) in rows {
                let mut rec = vec![self.dataset.clone(), a.activation.clone(), seed];
                rec.extend(v.iter().map(|x| x.to_string()));
                w.write_record(&rec).expect("in-memory csv write");
            }
        }
        into_string(w)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut rows = vec![[
            "Activation".to_string(),
            "Seed".into(),
            "Precision".into(),
            "Recall".into(),
            "F1-Score".into(),
            "Accuracy".into(),
        ]];
        for a in &self.activations {
            for r in &a.runs {
                rows.push(summary_row(
                    &a.activation,
                    &r.seed.to_string(),
                    MetricSummary::of(&r.report),
                ));
            }
            rows.push(summary_row(&a.activation, "mean", a.mean));
            rows.push(summary_row(&a.activation, "min", a.min));
            rows.push(summary_row(&a.activation, "max", a.max));
        }
        let _ = writeln!(out, "Dataset: {}", self.dataset);
        out.push_str(&align(&rows));
        if !self.differences.is_empty() {
            out.push('\n');
            let mut rows = vec![[
                "Dataset".to_string(),
                "Metric".into(),
                "A (%)".into(),
                "B (%)".into(),
                "Difference (%)".into(),
            ]];
            for d in &self.differences {
                rows.push([
                    self.dataset.clone(),
                    metric_title(&d.metric).into(),
                    format!("{} {:.2}", d.activation_a, d.value_a),
                    format!("{} {:.2}", d.activation_b, d.value_b),
                    d.formatted_difference(),
                ]);
            }
            out.push_str(&align(&rows));
        }
        out
    }

    /// One JSON object per line: every run, every activation summary, every difference.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for a in &self.activations {
            for r in &a.runs {
                let line = serde_json::json!({
                    "type": "run",
                    "dataset": self.dataset,
                    "activation": a.activation,
                    "seed": r.seed,
                    "report": r.report,
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
            let line = serde_json::json!({
                "type": "summary",
                "dataset": self.dataset,
                "activation": a.activation,
                "mean": a.mean,
                "min": a.min,
                "max": a.max,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        for d in &self.differences {
            let mut v = serde_json::to_value(d).expect("difference serialises");
            v["type"] = "difference".into();
            v["dataset"] = self.dataset.clone().into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    /// `(file name, contents)` for the chosen format.
    pub fn render(&self, format: ReportFormat) -> Vec<(String, String)> {
        match format {
            ReportFormat::Csv => vec![
                ("comparison.csv".into(), self.differences_csv()),
                ("runs.csv".into(), self.runs_csv()),
            ],
            ReportFormat::Table => vec![("comparison.txt".into(), self.to_table())],
            ReportFormat::Jsonl => vec![("comparison.jsonl".into(), self.to_json_lines())],
        }
    }
}

fn summary_row(activation: &str, seed: &str, m: MetricSummary) -> [String; 6] {
    [
        activation.to_string(),
        seed.to_string(),
        format_percent(m.precision),
        format_percent(m.recall),
        format_percent(m.f1_score),
        format_percent(m.accuracy),
    ]
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn render_eval(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Table => report.to_table(),
        ReportFormat::Jsonl => {
            let mut s = report.to_json_line();
            s.push('\n');
            s
        }
    }
}

/// Writes the comparison files into `dir` and returns their paths.
pub fn emit_report(
    report: &ComparisonReport,
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut paths = Vec::new();
    for (name, contents) in report.render(format) {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| ExperimentError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ClassMetrics;

    fn eval(p: f64, r: f64, f: f64, acc: f64) -> EvalReport {
        EvalReport {
            class_names: vec!["a".into()],
            per_class: vec![ClassMetrics {
                precision: p,
                recall: r,
                f1: f,
                support: 1,
            }],
            macro_precision: p,
            macro_recall: r,
            macro_f1: f,
            accuracy: acc,
        }
    }

    fn sample() -> ComparisonReport {
        let mish = ActivationResult::new(
            "mish",
            vec![
                SeedRun {
                    seed: 1,
                    report: eval(0.9, 0.8, 0.85, 0.9),
                },
                SeedRun {
                    seed: 2,
                    report: eval(0.7, 0.6, 0.65, 0.8),
                },
            ],
        );
        let relu = ActivationResult::new(
            "relu",
            vec![SeedRun {
                seed: 1,
                report: eval(0.5, 0.5, 0.5, 0.5),
            }],
        );
        ComparisonReport::new("demo", vec![1, 2], vec![mish, relu])
    }

    #[test]
    fn mean_within_range_and_differences() {
        let r = sample();
        let m = &r.activations[0];
        for j in 0..4 {
            assert!(m.min.values()[j] <= m.mean.values()[j] && m.mean.values()[j] <= m.max.values()[j]);
        }
        assert!((m.mean.precision - 0.8).abs() < 1e-15);
        assert_eq!(r.differences.len(), 4);
        let d = &r.differences[0];
        assert_eq!(d.difference, d.value_a - d.value_b);
        assert_eq!(d.formatted_difference(), "+30.00");
    }

    #[test]
    fn identical_activations_differ_by_zero() {
        let a = ActivationResult::new(
            "mish",
            vec![SeedRun {
                seed: 1,
                report: eval(0.3, 0.2, 0.25, 0.4),
            }],
        );
        let r = ComparisonReport::new("x", vec![1], vec![a.clone(), a]);
        assert!(r.differences.iter().all(|d| d.difference == 0.0));
        assert_eq!(r.differences[0].formatted_difference(), "+0.00");
    }

    #[test]
    fn renderings_parse_back() {
        let r = sample();
        let csv = r.differences_csv();
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1][1].to_string(), "recall");
        assert_eq!(rows[1][6].parse::<f64>().unwrap(), r.differences[1].difference);
        let runs = r.runs_csv();
        assert_eq!(runs.lines().count(), 1 + 5 + 4);
        assert!(r.to_table().contains("+30.00"));
        for line in r.to_json_lines().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["type"].is_string());
        }
        assert_eq!(r.render(ReportFormat::Csv).len(), 2);
    }
}
