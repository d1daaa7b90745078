use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mishnet::activation::ActivationKind;
use mishnet::data::{self, save_prepared_csv, DatasetRecipe, LabeledDataset, PrepareOptions};
use mishnet::experiment::{self, render_eval, ExperimentConfig, ExperimentError, Overrides, ReportFormat};
use mishnet::nn::io;
use mishnet::smote::SmoteConfig;

/// CNN-BiGRU activation-function experiments for intrusion-detection data.
#[derive(Debug, Parser)]
#[command(name = "mishnet", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Seed for the split (prepare), the run (train, compare) or the generator (synth)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Adam learning rate
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Skip SMOTE on the training split
    #[arg(long, global = true)]
    no_smote: bool,
    /// Report format: csv, table or jsonl
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<ReportFormat>,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn parse_activation(s: &str) -> Result<ActivationKind, String> {
    s.parse()
        .map_err(|e: mishnet::activation::ActivationError| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, scale, select, split and oversample a dataset; write train.csv and test.csv
    Prepare {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Train one activation and evaluate it on the held-out split
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_activation)]
        activation: ActivationKind,
        /// Output directory (defaults to the config's)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on a prepared CSV (or a `prepare` output directory)
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train every configured activation on one shared split and tabulate differences
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a Gaussian-blob dataset and a recipe for it
    Synth {
        #[arg(long)]
        classes: usize,
        /// Rows per class
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        sep: f64,
        #[arg(long, default_value_t = 8)]
        features: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn overrides(g: &GlobalOpts, out: Option<PathBuf>) -> Overrides {
    Overrides {
        seed: g.seed,
        epochs: g.epochs,
        batch_size: g.batch_size,
        learning_rate: g.lr,
        no_smote: g.no_smote,
        format: g.format,
        output_dir: out,
    }
}

fn load_config(path: &Path, o: &Overrides) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    cfg.apply(o);
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let g = &cli.global;
    let format = g.format.unwrap_or(ReportFormat::Table);
    match cli.command {
        Command::Prepare {
            recipe,
            out,
            test_fraction,
        } => {
            let recipe = DatasetRecipe::from_file(&recipe)?;
            let defaults = PrepareOptions::default();
            let options = PrepareOptions {
                test_fraction,
                split_seed: g.seed.unwrap_or(defaults.split_seed),
                smote: (!g.no_smote).then(SmoteConfig::default),
            };
            let prepared = data::prepare(&recipe, &options)?;
            fs::create_dir_all(&out).map_err(|source| ExperimentError::Io {
                path: out.display().to_string(),
                source,
            })?;
            save_prepared_csv(&prepared.train, out.join("train.csv"))?;
            save_prepared_csv(&prepared.test, out.join("test.csv"))?;
            let summary = serde_json_pretty(&prepared.summary());
            write_file(&out.join("summary.json"), &summary)?;
            emit(&format!("{summary}\n"));
        }
        Command::Train {
            config,
            activation,
            out,
        } => {
            let cfg = load_config(&config, &overrides(g, out))?;
            let seed = cfg.seeds[0];
            let outcome = experiment::run_single(&cfg, activation, seed)?;
            emit(&render_eval(&outcome.report, cfg.format));
        }
        Command::Evaluate { model, data } => {
            let model = io::load(&model)?;
            let path = if data.is_dir() { data.join("test.csv") } else { data };
            let dataset: LabeledDataset = data::read_prepared_csv(&path, &model.class_names)?;
            let (_, report) = experiment::evaluate_model(&model, &dataset)?;
            emit(&render_eval(&report, format));
        }
        Command::Compare { config, out } => {
            let cfg = load_config(&config, &overrides(g, out))?;
            let report = experiment::compare(&cfg)?;
            info!("reports written to {}", cfg.output_dir.display());
            if let Some((_, text)) = report.render(cfg.format).first() {
                emit(text);
            }
        }
        Command::Synth {
            classes,
            rows,
            sep,
            features,
            out,
        } => {
            let ds = data::generate_synthetic(rows, features, classes, sep, g.seed.unwrap_or(0))?;
            fs::create_dir_all(&out).map_err(|source| ExperimentError::Io {
                path: out.display().to_string(),
                source,
            })?;
            save_prepared_csv(&ds, out.join("synthetic.csv"))?;
            write_file(&out.join("synthetic.toml"), &synth_recipe(&ds))?;
            emit(&format!(
                "wrote {} rows ({} per class, {} features) to {}\n",
                ds.n_rows(),
                rows,
                features,
                out.display()
            ));
        }
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn synth_recipe(ds: &LabeledDataset) -> String {
    let mut s = String::from(
        "csv = \"synthetic.csv\"\nlabel_column = \"label\"\ncorrelation_threshold = 0.0\nscale = true\n\n[labels]\n",
    );
    for name in &ds.class_names {
        s.push_str(&format!("{name} = [\"{name}\"]\n"));
    }
    s
}

fn serde_json_pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serialises")
}
