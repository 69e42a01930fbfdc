use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sysid_lab::cli::{run, Invocation, Subcommand as Sub};

#[derive(Parser)]
#[command(name = "sysid-lab", version, about = "Finite-sample system identification laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the `seed` key in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV.
    Simulate(Common),
    /// Simulate and fit an estimator, writing the estimate as JSON.
    Identify(Common),
    /// Evaluate one closed-form bound from pinned scalar inputs.
    Bounds(Common),
    /// Monte Carlo coverage campaign over a (T, delta) grid.
    McCoverage(Common),
    /// Log-log convergence-rate fit across horizons.
    Rate(Common),
    /// Empirical quadratic-form tail against the closed-form bound.
    Tail(Common),
    /// Solve the steady-state filtering Riccati equation.
    Riccati(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Simulate(c) => (Sub::Simulate, c),
        Command::Identify(c) => (Sub::Identify, c),
        Command::Bounds(c) => (Sub::Bounds, c),
        Command::McCoverage(c) => (Sub::McCoverage, c),
        Command::Rate(c) => (Sub::Rate, c),
        Command::Tail(c) => (Sub::Tail, c),
        Command::Riccati(c) => (Sub::Riccati, c),
    };
    let invocation = Invocation {
        subcommand: sub,
        config_path: common.config,
        output_dir: common.out,
        seed_override: common.seed,
    };
    match run(&invocation) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
