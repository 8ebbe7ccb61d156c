//! Experiment driver for the `hqnn` binary: config files, training runs,
//! evaluation, the gradient-variance diagnostic and training-curve plots.

pub mod commands;
pub mod config;
pub mod metrics;
pub mod plot;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{cmd_eval, cmd_gradvar, cmd_train, SavedModel, TrainOutputs};
pub use config::{ExperimentConfig, ModelKind};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Training(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Training(_) => EXIT_TRAINING,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hqnn", version, about = "Train and evaluate hybrid quantum neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes metrics.csv, model.json and manifest.toml.
    Train {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print test loss and accuracy of a saved model.
    Eval { model: PathBuf, config: PathBuf },
    /// Gradient variance across random circuit initializations; writes gradvar.csv.
    Gradvar {
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        inits: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot training curves from metrics.csv as SVG.
    Plot {
        metrics: PathBuf,
        /// Second metrics file to overlay.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Output file (default: next to the first metrics file, as curves.svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs one subcommand and returns what it printed.
pub fn run(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Train { config, out } => {
            let cfg = ExperimentConfig::load(config)?;
            let outputs = cmd_train(&cfg, out.as_deref())?;
            let mut msg = format!("wrote {}", outputs.dir.display());
            if let Some(last) = outputs.history.last() {
                msg.push_str(&format!(
                    "\nepoch {} test_loss {:.8} test_acc {:.6}",
                    last.epoch, last.test_loss, last.test_accuracy
                ));
            }
            Ok(msg)
        }
        Command::Eval { model, config } => {
            let cfg = ExperimentConfig::load(config)?;
            let (loss, acc) = cmd_eval(model, &cfg)?;
            Ok(commands::format_eval(loss, acc))
        }
        Command::Gradvar { config, inits, out } => {
            let cfg = ExperimentConfig::load(config)?;
            let (path, _) = cmd_gradvar(&cfg, *inits, out.as_deref())?;
            Ok(format!("wrote {}", path.display()))
        }
        Command::Plot { metrics, compare, out } => {
            let first = metrics::read_metrics(metrics)?;
            let second = compare.as_deref().map(metrics::read_metrics).transpose()?;
            let label = |p: &Path| {
                p.parent()
                    .and_then(|d| d.file_name())
                    .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
            };
            let (l1, l2) = (label(metrics), compare.as_deref().map(label).unwrap_or_default());
            let mut series = vec![plot::Series { label: &l1, records: &first }];
            if let Some(s) = &second {
                series.push(plot::Series { label: &l2, records: s });
            }
            let path = out.clone().unwrap_or_else(|| metrics.with_file_name("curves.svg"));
            std::fs::write(&path, plot::render_svg(&series)).map_err(|e| CliError::io(&path, e))?;
            Ok(format!("wrote {}", path.display()))
        }
    }
}
