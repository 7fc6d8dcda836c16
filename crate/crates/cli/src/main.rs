//! `segqc`: synthetic data, feature extraction, quality models, evaluation
//! and the federation services behind one binary.
//!
//! Exit codes: 0 success, 1 usage or invalid input, 2 partial data
//! failure (some cases could not be processed), 3 internal error.

mod commands;
mod config;
mod data;
mod error;

use std::io::IsTerminal;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::commands::{
    ablate::AblateArgs, agent::AgentArgs, bootstrap::BootstrapArgs, eval::EvalArgs, extract::ExtractArgs,
    monitor::MonitorArgs, synth::SynthArgs, train::TrainArgs,
};

#[derive(Debug, Parser)]
#[command(name = "segqc", version, about = "Ground-truth-free quality control for lesion segmentation masks")]
struct Cli {
    /// Log filter, e.g. `info` or `segqc_federation=debug`; RUST_LOG wins when set.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic phantom dataset with corrupted predictions.
    Synth(SynthArgs),
    /// Compute the four quality features for every case of a manifest.
    Extract(ExtractArgs),
    /// Train a quality model from a features table and Dice labels.
    Train(TrainArgs),
    /// Evaluate models on labeled datasets.
    Eval(EvalArgs),
    /// Bootstrap distribution of failed-mask sensitivity.
    Bootstrap(BootstrapArgs),
    /// Leave-one-feature-out ablation of logistic regression.
    Ablate(AblateArgs),
    /// Run a site agent that pushes aggregate reports to a monitor.
    Agent(AgentArgs),
    /// Run the central monitor.
    Monitor(MonitorArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let filter = EnvFilter::try_from_default_env()
        .or_else(|_| EnvFilter::try_new(&cli.log_level))
        .unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();

    let result = match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Extract(a) => commands::extract::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Bootstrap(a) => commands::bootstrap::run(a),
        Command::Ablate(a) => commands::ablate::run(a),
        Command::Agent(a) => commands::agent::run(a),
        Command::Monitor(a) => commands::monitor::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
