//! `pmarl` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 runtime error.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pmarl::engine::{Method, PredictionMode};

#[derive(Parser)]
#[command(
    name = "pmarl",
    version,
    about = "Decentralised EV charging with prediction-augmented MARL"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Scenario TOML file.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory (created if absent).
    #[arg(long, short, env = "PMARL_OUT_DIR", default_value = "pmarl-out")]
    pub out: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone)]
pub struct Experiment {
    #[command(flatten)]
    pub common: Common,
    /// Overrides `n_runs`.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Overrides the drift window-MAPE threshold (percent).
    #[arg(long)]
    pub change_threshold: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic demand history as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Days to generate; defaults to `history_days`.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Train the day-ahead forecaster and save it as JSON.
    TrainForecaster {
        #[command(flatten)]
        common: Common,
        /// Demand CSV; defaults to the config's history (or a synthetic one).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run one method under one prediction mode.
    Run {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long, short)]
        method: Method,
        #[arg(long, short)]
        prediction: PredictionMode,
    },
    /// Run every method under every prediction mode.
    Compare {
        #[command(flatten)]
        exp: Experiment,
    },
    /// Render SVG plots from a report.
    Plot {
        report: PathBuf,
        /// Output directory; defaults to the report's directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Recompute oracle-backed values in a fixture manifest.
    RegenFixtures {
        manifest: PathBuf,
        /// Print the diff without writing.
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { common, days } => commands::synth(&common, days),
        Command::TrainForecaster { common, history } => commands::train(&common, history),
        Command::Run {
            exp,
            method,
            prediction,
        } => commands::run(&exp, vec![method], vec![prediction]),
        Command::Compare { exp } => {
            commands::run(&exp, Method::ALL.to_vec(), PredictionMode::ALL.to_vec())
        }
        Command::Plot { report, out, force } => commands::plot(&report, out, force),
        Command::RegenFixtures { manifest, check } => commands::regen(&manifest, check),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
