//! `dagsobol`: Sobol indices of DAG-structured processes from the command line.

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod failure;
mod pareto;
mod report;

use args::{Cli, Command};
use failure::Failure;

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DAGSOBOL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("DAGSOBOL_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Pareto(a) => commands::pareto(&a),
        Command::Minobs(a) => commands::minobs(&a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors by itself
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
