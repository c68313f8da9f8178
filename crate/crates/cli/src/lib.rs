//! Command-line front end: configuration, run directories and subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod failure;
pub mod output;
pub mod sweep;

use std::path::Path;

use serde_json::Value;

use crate::config::Config;
use crate::failure::Failure;
use crate::output::RunDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Evolve,
    VirialCheck,
    Decay,
    IdentitySuite,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Evolve => "evolve",
            Command::VirialCheck => "virial-check",
            Command::Decay => "decay",
            Command::IdentitySuite => "identity-suite",
            Command::Sweep => "sweep",
        }
    }
}

/// Runs one subcommand into `out` and writes its manifest, also on failure.
pub fn execute(command: Command, cfg: &Config, out: &Path, workers: usize) -> Result<Value, Failure> {
    let mut run = RunDir::create(out)?;
    let result = match command {
        Command::GroundState => commands::ground_state(cfg, &mut run),
        Command::Evolve => commands::evolve(cfg, &mut run),
        Command::VirialCheck => commands::virial_check(cfg, &mut run),
        Command::Decay => commands::decay(cfg, &mut run),
        Command::IdentitySuite => commands::identity_suite(cfg, &mut run),
        Command::Sweep => sweep::sweep(cfg, &mut run, workers),
    };
    match result {
        Ok(summary) => {
            run.finish(command.as_str(), cfg, summary.clone(), None)?;
            Ok(summary)
        }
        Err(f) => {
            // The original failure takes precedence over a manifest write error.
            let _ = run.finish(command.as_str(), cfg, Value::Null, Some(&f));
            Err(f)
        }
    }
}
