//! `gdbal` — balancing-based model and controller reduction toolkit.
//!
//! Usage: `gdbal <gramians|reduce|lqg|hinf|simulate|verify> --config <path>
//! [--out <dir>] [--seed <u64>]`.
//!
//! Exit codes: 0 success / all checks pass, 1 verification failure,
//! 2 infeasibility, 3 configuration error.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::{Job, Outcome};
use config::JobConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gdbal",
    about = "Balancing-based model and controller reduction for nonlinear systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the vertex-relaxed Lyapunov inequalities for a Gramian pair.
    Gramians(JobArgs),
    /// Balance, truncate and bound the reduction error.
    Reduce(JobArgs),
    /// Solve the Riccati pair and build the observer-based controller.
    Lqg(JobArgs),
    /// Certify disturbance attenuation and build full/reduced controllers.
    Hinf(JobArgs),
    /// Run the configured simulation scenarios to CSV.
    Simulate(JobArgs),
    /// Run every applicable property verifier and aggregate pass/fail.
    Verify(JobArgs),
}

#[derive(clap::Args)]
struct JobArgs {
    /// Path to the job configuration (JSON, schema v1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output_dir` from the config, or `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_job(args: &JobArgs) -> anyhow::Result<Job> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        anyhow::anyhow!("cannot read config {}: {e}", args.config.display())
    })?;
    let mut config = JobConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Job::prepare(config, out)
}

fn run() -> Result<Outcome, (u8, anyhow::Error)> {
    let cli = Cli::parse();
    let (args, f): (&JobArgs, fn(&Job) -> anyhow::Result<Outcome>) = match &cli.command {
        Command::Gramians(a) => (a, commands::cmd_gramians),
        Command::Reduce(a) => (a, commands::cmd_reduce),
        Command::Lqg(a) => (a, commands::cmd_lqg),
        Command::Hinf(a) => (a, commands::cmd_hinf),
        Command::Simulate(a) => (a, commands::cmd_simulate),
        Command::Verify(a) => (a, commands::cmd_verify),
    };
    let job = load_job(args).map_err(|e| (3u8, e))?;
    f(&job).map_err(|e| (3u8, e))
}

fn main() -> ExitCode {
    match run() {
        Ok(Outcome::Success) => {
            println!("ok");
            ExitCode::SUCCESS
        }
        Ok(Outcome::VerificationFailed) => {
            eprintln!("verification failed (see report)");
            ExitCode::from(1)
        }
        Ok(Outcome::Infeasible) => {
            eprintln!("infeasible (see report)");
            ExitCode::from(2)
        }
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
