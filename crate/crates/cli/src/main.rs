//! `ebm`: generate datasets, train Boltzmann-machine anomaly detectors, score
//! data, run greedy sweeps, and export energy distributions.
//!
//! Exit codes: 0 ok, 2 usage, 3 generation infeasible, 4 I/O or parse,
//! 5 model/dataset mismatch.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

fn configure_threads() -> anyhow::Result<()> {
    let threads = match std::env::var("EBM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| anyhow::anyhow!("EBM_THREADS must be a non-negative integer, got {v:?}"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(commands::EXIT_USAGE);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
