//! Command-line front end: simulate a drive, train the prediction cases on
//! its trace, predict with a saved model, audit gradients and draw figures.

mod commands;
pub mod svg;

use std::path::PathBuf;

use bldc_core::ann::AnnError;
use bldc_core::sim::{SimError, CONFIG_KEYS};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{
    cmd_figures, cmd_gradcheck, cmd_predict, cmd_simulate, cmd_train, GradcheckOutcome,
    TrainOutcome,
};

#[derive(Debug, Parser)]
#[command(
    name = "bldc",
    version,
    about = "Six-step BLDC drive simulator and trace-trained MLP cases"
)]
#[command(after_help = CONFIG_KEYS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the closed-loop simulation; writes trace.csv and summary.txt.
    #[command(after_help = CONFIG_KEYS)]
    Simulate(SimulateArgs),
    /// Train one prediction case on a trace; writes caseN_metrics.csv and caseN.model.
    Train(TrainArgs),
    /// Apply a saved case model to a trace; writes caseN_predictions.csv.
    Predict(PredictArgs),
    /// Compare backprop against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Render SVG charts from a trace, metrics and prediction files.
    Figures(FiguresArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed recorded with the run.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    pub case: u32,
    /// Trace CSV; defaults to `<out>/trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seeds the split, the initial weights and the batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Initial learning rate; the case default when omitted.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Softmax instead of identity output on cases 1 and 2.
    #[arg(long)]
    pub softmax_output: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    pub case: u32,
    /// Model file; defaults to `<out>/caseN.model`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trace CSV; defaults to `<out>/trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Split seed used to flag validation rows; match the training seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random networks per activation/loss pairing.
    #[arg(long, default_value_t = 5)]
    pub networks: usize,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    /// Trace CSV; defaults to `<out>/trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Metrics CSVs written by `train`; repeatable.
    #[arg(long)]
    pub metrics: Vec<PathBuf>,
    /// Prediction CSVs written by `predict`; repeatable.
    #[arg(long)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{what} not found: {}", path.display())]
    MissingInput { what: &'static str, path: PathBuf },
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Ann(AnnError),
}

impl CliError {
    /// 0 success, 2 usage/config/input errors, 3 numerical failures, 1 for
    /// output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingInput { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Write { .. } => 1,
            CliError::Sim(e) => match e {
                SimError::NumericalDivergence { .. } => 3,
                SimError::Io(_) => 1,
                _ => 2,
            },
            CliError::Ann(e) => match e {
                AnnError::NonFiniteLoss { .. } | AnnError::NonFiniteWeights(_) => 3,
                AnnError::Io(_) => 1,
                _ => 2,
            },
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<AnnError> for CliError {
    fn from(e: AnnError) -> Self {
        CliError::Ann(e)
    }
}

/// Runs one parsed command, printing its report to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let summary = cmd_simulate(a.config.as_deref(), &a.out, a.seed)?;
            print!("{summary}");
        }
        Command::Train(a) => {
            let outcome = cmd_train(&a)?;
            print!("{}", outcome.report);
        }
        Command::Predict(a) => {
            let path = cmd_predict(&a)?;
            println!("wrote {}", path.display());
        }
        Command::Gradcheck(a) => {
            let outcome = cmd_gradcheck(a.seed, a.networks)?;
            print!("{}", outcome.report);
            if !outcome.passed {
                return Err(CliError::Numerical(format!(
                    "gradient check failed: max relative error {:e}",
                    outcome.max_rel_error
                )));
            }
        }
        Command::Figures(a) => {
            for path in cmd_figures(&a)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
