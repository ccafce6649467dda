mod args;
mod commands;
mod output;
mod plot;

use clap::Parser;
use std::fmt;
use std::process::ExitCode;

use args::Cli;
use output::{ExperimentConfig, Output};

/// Environment variable holding the worker thread count (default: all
/// cores).
const THREADS_VAR: &str = "QUENCHED_THREADS";

#[derive(Debug)]
pub enum CliError {
    Input(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
        }
    }
}

impl From<quenched_core::Error> for CliError {
    fn from(e: quenched_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: &Cli, seed: u64) -> Result<bool, CliError> {
    if cli.report.contains(['/', '\\']) || cli.report.is_empty() {
        return Err(CliError::Input("--report must be a file name inside --out-dir".into()));
    }
    let mut out = Output::new(cli.out_dir.clone())?;
    let outcome = commands::run(&cli.command, seed, &mut out)?;
    let config = ExperimentConfig {
        seed,
        command: &cli.command,
    };
    out.write_report(&cli.report, &config, &outcome)?;
    println!("{}", outcome.summary);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let seed = cli.seed.unwrap_or_else(rand::random);
    match run(&cli, seed) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
