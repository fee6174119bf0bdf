//! `pushgrid` — train, fine-tune, evaluate, and replay planar-pushing
//! policies from the command line.
//!
//! Exit codes: 0 success, 2 usage/configuration problem, 3 checkpoint
//! format/compatibility problem, 4 runtime fault.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{EvalArgs, FinetuneArgs, ReplayArgs, TrainArgs};
use pushgrid::Error;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pushgrid",
    version,
    about = "Planar pushing among obstacles: training, evaluation, and trajectory replay"
)]
struct Cli {
    /// Worker threads for rollouts and evaluation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from scratch.
    Train(TrainArgs),
    /// Continue training a checkpoint (networks + optimizer) on a scenario.
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint over seeded episode suites.
    Eval(EvalArgs),
    /// Re-simulate a recorded trajectory and report divergence.
    Replay(ReplayArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownScenario { .. } | Error::TrajectoryFormat(_) | Error::Json(_) => 2,
        Error::CheckpointFormat(_) | Error::CheckpointMismatch(_) => 3,
        _ => 4,
    }
}

fn run(cli: &Cli) -> pushgrid::Result<()> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {workers} workers: {e}")))?;
    }
    match &cli.command {
        Command::Train(args) => commands::cmd_train(args),
        Command::Finetune(args) => commands::cmd_finetune(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Replay(args) => commands::cmd_replay(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
