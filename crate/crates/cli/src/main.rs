//! `lsm`: batch front-end for switched-system identification.
//!
//! Exit codes: 0 ok, 1 input error, 2 estimator hit the iteration limit,
//! 3 combinatorial budget exceeded.

mod commands;
mod config;
mod experiment;
mod views;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsm_core::estimator::EstimatorMode;

use crate::config::{Overrides, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{message}")]
    Budget {
        needed: u128,
        budget: u128,
        message: String,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Budget { .. } => 3,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Input(_) => "input_error",
            CliError::Io(_) => "io_error",
            CliError::Budget { .. } => "budget_exceeded",
        };
        let mut obj = serde_json::json!({
            "error": kind,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Budget { needed, budget, .. } = self {
            obj["needed"] = serde_json::json!(needed.to_string());
            obj["budget"] = serde_json::json!(budget.to_string());
        }
        obj
    }
}

#[derive(Debug, Parser)]
#[command(name = "lsm", version, about = "Least sum-of-minimums identification of switched linear systems")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Heuristic,
    Exact,
    Both,
}

impl From<Mode> for EstimatorMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Heuristic => EstimatorMode::Heuristic,
            Mode::Exact => EstimatorMode::ExactBruteforce,
            Mode::Both => EstimatorMode::Both,
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides `data.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Estimator mode (overrides `estimator.mode`).
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Combinatorial budget for the oracle and the subset enumerations.
    #[arg(long)]
    budget: Option<u128>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let ov = Overrides {
            seed: self.seed,
            mode: self.mode.map(Into::into),
            budget: self.budget,
            out: self.out.clone(),
        };
        Ok(ScenarioConfig::load(&self.config)?.resolve(&ov))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset CSV and its JSON sidecar.
    Simulate(Common),
    /// Fit the estimator to a dataset.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
    },
    /// Compute the informativity metrics of a dataset.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate bounds and conditions for an estimate.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// `estimate.json` written by `lsm estimate`.
        #[arg(long)]
        estimate: PathBuf,
        /// `metrics.json` written by `lsm metrics`.
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Run a Monte Carlo sweep.
    Experiment(Common),
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(c) => commands::cmd_simulate(&c.load()?).map(|_| 0),
        Command::Estimate { common, data } => {
            let converged = commands::cmd_estimate(&common.load()?, &data)?;
            Ok(if converged { 0 } else { 2 })
        }
        Command::Metrics { common, data } => commands::cmd_metrics(&common.load()?, &data).map(|_| 0),
        Command::Bounds {
            common,
            data,
            estimate,
            metrics,
        } => commands::cmd_bounds(&common.load()?, &data, &estimate, &metrics).map(|_| 0),
        Command::Experiment(c) => experiment::cmd_experiment(&c.load()?).map(|_| 0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
