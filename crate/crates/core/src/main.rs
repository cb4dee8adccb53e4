use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optliq::cli::{cmd_cost, cmd_simulate, cmd_solve, cmd_sweep, cmd_verify, RunConfig};
use optliq::{Error, Result};

/// Optimal liquidation under stochastic price impact.
#[derive(Debug, Parser)]
#[command(name = "optliq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the penalised BSDEs along the L-schedule; writes yfield.csv and convergence.json.
    Solve(Args),
    /// Integrate the optimal control; writes trajectory.csv.
    Simulate(Args),
    /// Price the optimal control and the candidates; writes cost.json.
    Cost(Args),
    /// Run the verification suite; writes report.json.
    Verify(Args),
    /// Price the counterexample family x^α; writes sweep.csv.
    Sweep(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// JSON configuration file (optional for verify).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &Args, allow_default: bool) -> Result<RunConfig> {
    let config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None if allow_default => RunConfig::default_model(),
        None => return Err(Error::Config("--config is required".into())),
    };
    config.with_overrides(args.seed, args.paths, args.out.clone())
}

fn run(cli: Cli) -> Result<i32> {
    let (args, verify) = match &cli.command {
        Command::Verify(a) => (a, true),
        Command::Solve(a) | Command::Simulate(a) | Command::Cost(a) | Command::Sweep(a) => (a, false),
    };
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let config = load(args, verify)?;
    match cli.command {
        Command::Solve(_) => cmd_solve(&config),
        Command::Simulate(_) => cmd_simulate(&config),
        Command::Cost(_) => cmd_cost(&config),
        Command::Verify(_) => cmd_verify(&config),
        Command::Sweep(_) => cmd_sweep(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
