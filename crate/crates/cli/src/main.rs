//! `rally` — train, evaluate, and benchmark table-tennis controllers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error,
//! 4 interrupted (a clean checkpoint was written before exiting).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rally", version, about = "Table-tennis robot training stack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run evolutionary-search training.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a batch of episodes.
    Eval(EvalArgs),
    /// Measure rollout throughput at increasing worker counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Rollout worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (flag > RALLY_OUT_DIR > config > ./rally-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Resume from a checkpoint; without a value, the latest checkpoint in
    /// the output directory is used.
    #[arg(long)]
    resume: Option<Option<PathBuf>>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Episode count (overrides the config).
    #[arg(long)]
    episodes: Option<usize>,
    /// Quick mode: 10 episodes.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
}

/// CLI failure classes, mapped onto distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl From<rally_core::Error> for CliError {
    fn from(err: rally_core::Error) -> Self {
        match err {
            rally_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub enum Completion {
    Done,
    Interrupted,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::run_train(args),
        Command::Eval(args) => commands::run_eval(args),
        Command::Bench(args) => commands::run_bench(args),
    };
    match result {
        Ok(Completion::Done) => ExitCode::SUCCESS,
        Ok(Completion::Interrupted) => {
            eprintln!("interrupted; final checkpoint written");
            ExitCode::from(4)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
