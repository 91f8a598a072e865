//! `tad`: batch workflows for telemetry anomaly detection.
//!
//! Every subcommand reads one JSON config (unknown keys rejected) and writes
//! its outputs to `--out`. Exit status is 0 on success, 1 for usage or
//! configuration errors and 2 for runtime failures.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tad",
    version,
    about = "Spacecraft telemetry anomaly detection workflows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output file or directory (see the subcommand help).
    #[arg(long, short)]
    out: PathBuf,
    /// Root seed for every stochastic stage; overrides seeds in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled series (`--out` is a CSV file).
    Synth(Common),
    /// Train a detector model (`--out` is a model directory).
    Train(Common),
    /// Run a trained detector over a series (`--out` is a JSON file).
    Detect(Common),
    /// Score a detection against labels (`--out` is a JSON file).
    Evaluate(Common),
    /// Export angular-field images of selected windows (`--out` is a directory).
    Gaf(Common),
    /// Cost and on-board budget of a model (`--out` is a directory).
    Profile(Common),
    /// Architecture search (`--out` is a directory).
    Search {
        #[command(flatten)]
        common: Common,
        /// Trials trained concurrently; overrides the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Performance and resource tables from earlier outputs (`--out` is a text file).
    Report(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(c) => commands::synth(&c.config, &c.out, c.seed),
        Command::Train(c) => commands::train(&c.config, &c.out, c.seed),
        Command::Detect(c) => commands::detect(&c.config, &c.out),
        Command::Evaluate(c) => commands::evaluate(&c.config, &c.out),
        Command::Gaf(c) => commands::gaf(&c.config, &c.out),
        Command::Profile(c) => commands::profile(&c.config, &c.out),
        Command::Search { common: c, workers } => {
            commands::search(&c.config, &c.out, c.seed, workers)
        }
        Command::Report(c) => commands::report(&c.config, &c.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
