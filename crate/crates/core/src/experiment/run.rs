use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::config::ExperimentConfig;
use super::report::{emit_report, render_eval, ActivationResult, ComparisonReport, SeedRun};
use super::ExperimentError;
use crate::activation::ActivationKind;
use crate::data::{generate_synthetic, prepare, prepare_dataset, DatasetRecipe, LabeledDataset, PreparedData};
use crate::metrics::{evaluate, ConfusionMatrix, EvalReport};
use crate::nn::{io, train, LossTrace, Model, TrainError};

/// Result of training and evaluating one (activation, seed) pair.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub activation: ActivationKind,
    pub seed: u64,
    /// Weights rounded to the precision stored in model files.
    pub model: Model,
    pub confusion: ConfusionMatrix,
    pub report: EvalReport,
    pub trace: LossTrace,
}

/// Loads and preprocesses the configured data source once.
pub fn load_data(config: &ExperimentConfig) -> Result<PreparedData, ExperimentError> {
    let options = config.prepare_options();
    if let Some(path) = &config.recipe {
        let recipe = DatasetRecipe::from_file(path)?;
        Ok(prepare(&recipe, &options)?)
    } else if let Some(s) = &config.synthetic {
        let raw = generate_synthetic(s.rows_per_class, s.features, s.classes, s.separation, s.seed)?;
        Ok(prepare_dataset(raw, true, None, &options)?)
    } else {
        Err(ExperimentError::Config("no data source configured".into()))
    }
}

pub fn dataset_name(config: &ExperimentConfig) -> String {
    if let Some(n) = &config.name {
        return n.clone();
    }
    match &config.recipe {
        Some(p) => p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        None => "synthetic".into(),
    }
}

/// Predicts every row of `dataset` and scores the predictions.
pub fn evaluate_model(
    model: &Model,
    dataset: &LabeledDataset,
) -> Result<(ConfusionMatrix, EvalReport), ExperimentError> {
    if dataset.n_features() != model.spec.input_len {
        return Err(ExperimentError::Data(crate::data::DataError::Invalid(format!(
            "data has {} features, model expects {}",
            dataset.n_features(),
            model.spec.input_len
        ))));
    }
    if dataset.class_names != model.class_names {
        return Err(ExperimentError::Data(crate::data::DataError::Invalid(format!(
            "data classes {:?} differ from model classes {:?}",
            dataset.class_names, model.class_names
        ))));
    }
    let mut predicted = Vec::with_capacity(dataset.n_rows());
    for row in &dataset.features {
        predicted.push(model.predict(row).map_err(|e| ExperimentError::Train(e.to_string()))?);
    }
    Ok(evaluate(&dataset.labels, &predicted, &model.class_names)?)
}

/// Trains on `data.train` and evaluates on the untouched `data.test`.
pub fn run_prepared(
    config: &ExperimentConfig,
    data: &PreparedData,
    activation: ActivationKind,
    seed: u64,
) -> Result<RunOutcome, ExperimentError> {
    let spec = config.model_spec(data.train.n_features(), data.train.n_classes(), activation);
    let mut model = Model::new(spec, data.train.class_names.clone(), seed)
        .map_err(|e| ExperimentError::Config(format!("invalid model: {e}")))?;
    let label = String::from(activation);
    info!(
        "training {label} seed {seed}: {} rows, {} parameters",
        data.train.n_rows(),
        model.params.parameter_count()
    );
    let trace = train(
        &mut model,
        &data.train.features,
        &data.train.labels,
        &config.train_config(),
        seed,
    )
    .map_err(|e| match e {
        TrainError::Divergence { epoch } => ExperimentError::Divergence {
            activation: label.clone(),
            seed,
            epoch,
        },
        other => ExperimentError::Train(other.to_string()),
    })?;
    // evaluate exactly what gets saved
    model.params.round_to_f32();
    let (confusion, report) = evaluate_model(&model, &data.test)?;
    info!(
        "{label} seed {seed}: final epoch loss {:.5}, test accuracy {:.4}",
        trace.epochs.last().copied().unwrap_or(f64::NAN),
        report.accuracy
    );
    Ok(RunOutcome {
        activation,
        seed,
        model,
        confusion,
        report,
        trace,
    })
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes the model, its evaluation report and the per-epoch loss curve.
pub fn persist_run(
    outcome: &RunOutcome,
    label: &str,
    config: &ExperimentConfig,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let stem = format!("{}-seed{}", file_safe(label), outcome.seed);
    let model_path = dir.join(format!("model-{stem}.mnet"));
    io::save(&outcome.model, &model_path)?;
    let report_path = dir.join(format!("report-{stem}.{}", config.format.extension()));
    write(&report_path, &render_eval(&outcome.report, config.format))?;
    let loss_path = dir.join(format!("loss-{stem}.csv"));
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in outcome.trace.epochs.iter().enumerate() {
        let _ = writeln!(loss, "{},{l}", i + 1);
    }
    write(&loss_path, &loss)?;
    Ok(vec![model_path, report_path, loss_path])
}

fn write(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|e| ExperimentError::io(path, e))
}

/// Full pipeline for one activation and seed; persists the outputs.
pub fn run_single(
    config: &ExperimentConfig,
    activation: ActivationKind,
    seed: u64,
) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let data = load_data(config)?;
    let outcome = run_prepared(config, &data, activation, seed)?;
    persist_run(&outcome, &String::from(activation), config)?;
    Ok(outcome)
}

/// Unique display labels; a repeated activation gets a `#n` suffix.
fn labels(activations: &[ActivationKind]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    activations
        .iter()
        .map(|&a| {
            let base = String::from(a);
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}#{n}")
            }
        })
        .collect()
}

/// Runs every (activation, seed) pair on one shared split and SMOTE output.
/// Nothing is written to disk.
pub fn compare_prepared(
    config: &ExperimentConfig,
    data: &PreparedData,
    dataset: &str,
) -> Result<(ComparisonReport, Vec<(String, RunOutcome)>), ExperimentError> {
    let mut results = Vec::new();
    let mut outcomes = Vec::new();
    for (activation, label) in config.activations.iter().zip(labels(&config.activations)) {
        let mut runs = Vec::new();
        for &seed in &config.seeds {
            let outcome = run_prepared(config, data, *activation, seed)?;
            runs.push(SeedRun {
                seed,
                report: outcome.report.clone(),
            });
            outcomes.push((label.clone(), outcome));
        }
        results.push(ActivationResult::new(label, runs));
    }
    Ok((ComparisonReport::new(dataset, config.seeds.clone(), results), outcomes))
}

/// Compares the configured activations and writes models, per-run reports
/// and the comparison report to the output directory.
pub fn compare(config: &ExperimentConfig) -> Result<ComparisonReport, ExperimentError> {
    config.validate()?;
    if config.activations.len() < 2 {
        return Err(ExperimentError::Config("compare needs at least two activations".into()));
    }
    let data = load_data(config)?;
    let (report, outcomes) = compare_prepared(config, &data, &dataset_name(config))?;
    for (label, outcome) in &outcomes {
        persist_run(outcome, label, config)?;
    }
    emit_report(&report, config.format, &config.output_dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{ModelOverrides, SyntheticSource};

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::synthetic(SyntheticSource {
            rows_per_class: 12,
            features: 6,
            classes: 2,
            separation: 6.0,
            seed: 3,
        });
        cfg.model = ModelOverrides {
            conv_filters: Some(3),
            gru_units: Some(3),
            dense_units: Some(4),
            ..ModelOverrides::default()
        };
        cfg.epochs = 3;
        cfg.seeds = vec![5];
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn duplicate_labels_are_suffixed() {
        let l = labels(&[ActivationKind::Mish, ActivationKind::ReLU, ActivationKind::Mish]);
        assert_eq!(l, vec!["mish", "relu", "mish#2"]);
        assert_eq!(file_safe("elu:0.5#2"), "elu_0.5_2");
    }

    #[test]
    fn single_run_persists_a_loadable_model() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let out = run_single(&cfg, ActivationKind::Mish, 5).unwrap();
        let loaded = io::load(dir.path().join("model-mish-seed5.mnet")).unwrap();
        assert_eq!(loaded, out.model);
        assert!(dir.path().join("report-mish-seed5.csv").exists());
        let loss = fs::read_to_string(dir.path().join("loss-mish-seed5.csv")).unwrap();
        assert_eq!(loss.lines().count(), 4);
        let again = run_single(&cfg, ActivationKind::Mish, 5).unwrap();
        assert_eq!(again.report, out.report);
    }

    #[test]
    fn compare_needs_two_activations() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.activations = vec![ActivationKind::ReLU];
        assert!(matches!(compare(&cfg), Err(ExperimentError::Config(_))));
    }
}
