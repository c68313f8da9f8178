use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dslab_cli::config::Config;
use dslab_cli::failure::Failure;
use dslab_cli::{execute, Command};

#[derive(Parser)]
#[command(
    name = "dslab",
    version,
    about = "Pseudo-spectral laboratory for the elliptic-elliptic Davey-Stewartson system in 3D"
)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve and certify the ground state.
    GroundState,
    /// Evolve scaled ground-state data and monitor blow-up.
    Evolve,
    /// Check the second-derivative virial identity against time stepping.
    VirialCheck,
    /// Measure pairing decay of the nonlocal operators.
    Decay,
    /// Run the operator identity checks.
    IdentitySuite,
    /// Evaluate a task over a parameter grid.
    Sweep,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
        cfg.validate()?;
    }
    let command = match cli.command {
        Sub::GroundState => Command::GroundState,
        Sub::Evolve => Command::Evolve,
        Sub::VirialCheck => Command::VirialCheck,
        Sub::Decay => Command::Decay,
        Sub::IdentitySuite => Command::IdentitySuite,
        Sub::Sweep => Command::Sweep,
    };
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = execute(command, &cfg, &cli.out, workers)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dslab: {}: {}", f.kind(), f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
