//! `mll`: runs verification campaigns, trainings, gradient checks, the
//! mutual-information demo and retrieval evaluation.
//!
//! Exit codes: 0 success, 1 verification or training failure, 2 usage or
//! configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mll_core::eval::Distance;

use crate::commands::Status;
use crate::config::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mll",
    version,
    about = "Metric-learning loss verifiers and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file (unknown keys are rejected).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "mll-out")]
    out: PathBuf,

    /// Trials (verify), batches (grad-check) or random joints (mi-demo).
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads for parallel campaigns.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Seeded randomized campaigns over the bound verifiers.
    Verify,
    /// Train an encoder on synthetic blobs (or run the bound demo).
    Train,
    /// Compare analytic gradients with central differences.
    GradCheck,
    /// Mutual-information views, the cross-entropy decomposition and the
    /// Gaussian tightness demo.
    MiDemo,
    /// Recall@k of stored embeddings.
    EvalRecall(EvalArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Embeddings as CSV or MLL1 binary.
    #[arg(long, value_name = "PATH")]
    embeddings: Option<PathBuf>,

    /// Labels, one integer per line.
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,

    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,

    /// Distance kind; repeat for both.
    #[arg(long)]
    distance: Option<Vec<Distance>>,
}

/// Flags shared by every subcommand.
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub trials: Option<usize>,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MLL_LOG", "warn"))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<Status, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let g = Globals {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        trials: cli.trials,
    };
    match cli.command {
        Command::Verify => commands::verify(&g),
        Command::Train => commands::train(&g),
        Command::GradCheck => commands::grad_check(&g),
        Command::MiDemo => commands::mi_demo(&g),
        Command::EvalRecall(args) => commands::eval_recall(&g, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
