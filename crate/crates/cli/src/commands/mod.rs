use std::path::PathBuf;

use anyhow::Result;

use crate::{Cli, Command};

pub mod analyze;
pub mod examples;
pub mod folk;
pub mod simulate;
pub mod unravel;

/// Runs the selected command; returns whether all verdicts passed and the run directory.
pub fn run(cli: &Cli) -> Result<(bool, PathBuf)> {
    if cli.common.tol.is_nan() || cli.common.tol < 0.0 {
        return Err(crate::ConfigError::new("--tol must be non-negative").into());
    }
    match &cli.command {
        Command::Analyze(a) => analyze::run(&cli.common, a),
        Command::Folk(a) => folk::run(&cli.common, a),
        Command::Simulate(a) => simulate::run(&cli.common, a),
        Command::Unravel(a) => unravel::run(&cli.common, a),
        Command::Examples(a) => examples::run(&cli.common, a),
    }
}
