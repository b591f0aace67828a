//! Batch experiment front end: config ingestion, subcommand dispatch,
//! replication orchestration, and CSV/JSON emission.
//!
//! Every subcommand reads one JSON experiment config, resolves defaults, and
//! writes artifacts into the output directory: a `report.json` whose bytes
//! are a pure function of the resolved config, CSV artifacts listed in the
//! report's manifest, and a `run_meta.json` holding wall-clock runtime (the
//! only nondeterministic file). Exit codes: 0 success, 1 a verification
//! check failed, 2 configuration error, 3 runtime error.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::Pipeline;

/// A recoverable failure, split by whose fault it is: the configuration
/// (exit 2) or the run itself (exit 3).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "gjnlab",
    version,
    about = "Numerical laboratory for queueing networks under multi-scale heavy traffic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form limit parameters and identity residuals for a network.
    Limits(RunArgs),
    /// Simulate pre-limit network paths and dump them as CSV.
    SimulateGjn(RunArgs),
    /// Simulate reflected-diffusion paths and report empirical moments.
    SimulateSrbm(RunArgs),
    /// Run the verification battery and write a machine-readable report.
    Verify(RunArgs),
    /// Run the scale-sweep trend experiments across the configured grid.
    Sweep(RunArgs),
}

/// Flags shared by every subcommand. Each flag can also come from the
/// environment (`GJNLAB_*`); an explicit flag wins over the environment,
/// which wins over the config file.
#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long, env = "GJNLAB_CONFIG")]
    config: PathBuf,
    /// Master seed, overriding the config's `masterSeed`.
    #[arg(long, env = "GJNLAB_SEED")]
    seed: Option<u64>,
    /// Worker threads for replication batches (0 = one per core).
    #[arg(long, env = "GJNLAB_WORKERS")]
    workers: Option<usize>,
    /// Output directory for reports and CSV artifacts.
    #[arg(long, env = "GJNLAB_OUT")]
    out: Option<PathBuf>,
    /// Additionally write tidy long-format CSVs for external plotting.
    #[arg(long, env = "GJNLAB_EMIT_PLOT_DATA")]
    emit_plot_data: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match dispatch(&cli.command, started) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Config(msg)) => {
            eprintln!("gjnlab: config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("gjnlab: runtime error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: &Command, started: Instant) -> Result<u8, CliError> {
    let (pipeline, args) = match command {
        Command::Limits(a) => (Pipeline::Limits, a),
        Command::SimulateGjn(a) => (Pipeline::SimulateGjn, a),
        Command::SimulateSrbm(a) => (Pipeline::SimulateSrbm, a),
        Command::Verify(a) => (Pipeline::Verify, a),
        Command::Sweep(a) => (Pipeline::Sweep, a),
    };
    let ctx = config::load(
        &args.config,
        pipeline,
        args.seed,
        args.workers,
        args.out.clone(),
        args.emit_plot_data,
    )?;
    let exit = match pipeline {
        Pipeline::Limits => commands::limits::run(&ctx)?,
        Pipeline::SimulateGjn => commands::gjn::run(&ctx)?,
        Pipeline::SimulateSrbm => commands::srbm::run(&ctx)?,
        Pipeline::Verify => commands::verify::run(&ctx)?,
        Pipeline::Sweep => commands::sweep::run(&ctx)?,
    };
    report::write_run_meta(&ctx.out_dir, pipeline.name(), started.elapsed().as_secs_f64())?;
    Ok(exit)
}
