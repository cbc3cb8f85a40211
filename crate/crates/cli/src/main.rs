//! Batch runner: loads games and scenarios, dispatches to the analysis routines and writes
//! JSON and CSV reports under `<out>/<command>/<label or timestamp>/`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod load;
mod output;

/// Errors caused by bad input rather than a failure of the tool.
#[derive(Debug)]
pub struct ConfigError(String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser, Debug)]
#[command(name = "condis", version, about = "Conditional disclosure and commitment analysis toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Root output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Run directory name (defaults to a timestamp).
    #[arg(long, global = true)]
    pub label: Option<String>,
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Numerical tolerance for verdicts.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Worker threads for trial batches.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Feasibility, interim individual rationality, incentive compatibility and efficiency of a payoff.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Builds folk-theorem devices for a target policy and verifies the equilibrium.
    Folk(commands::folk::FolkArgs),
    /// Runs program games: all SIR bots, or one deviator against the rest.
    Simulate(commands::simulate::SimulateArgs),
    /// Solves the voluntary-disclosure game and checks the target inside every message cell.
    Unravel(commands::unravel::UnravelArgs),
    /// Regression checks for the war, auction and mountain examples.
    Examples(commands::examples::ExamplesArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok((pass, dir)) => {
            println!("{} {}", if pass { "PASS" } else { "FAIL" }, dir.display());
            ExitCode::from(if pass { 0 } else { 1 })
        }
        Err(e) if e.chain().any(|c| c.is::<ConfigError>()) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}
