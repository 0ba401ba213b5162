//! `shelfwise` command-line tool.
//!
//! Exit codes: 0 success, 2 input/usage errors, 3 discovery failures
//! (unknown product, too few sales, capacity below the largest purchase),
//! 4 reducible chain, 5 solver failure. Data goes to stdout, diagnostics to
//! stderr.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use shelfwise_service::{ApiError, ErrorKind};
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::InvalidRequest | ErrorKind::NoLog => 2,
        ErrorKind::UnknownProduct | ErrorKind::NoRates | ErrorKind::CapacityTooSmall => 3,
        ErrorKind::NotIrreducible => 4,
        ErrorKind::SolverFailure => 5,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Products { input, output } => commands::products(input, output),
        Command::Discover { input, model, output } => commands::discover(input, model, output),
        Command::Analyze { input, model, strategy, output } => commands::analyze(input, model, strategy, output),
        Command::Sweep { input, model, strategy, output } => commands::sweep(input, model, strategy, output),
        Command::Simulate { input, model, sim, output } => commands::simulate(input, model, sim, output),
        Command::Serve { input, port, host, cors_origins } => commands::serve(input, host, *port, cors_origins),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("SHELFWISE_LOG_LEVEL").unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<ApiError>() {
                Some(api) => {
                    if !api.detail.is_null() {
                        eprintln!("detail: {}", api.detail);
                    }
                    ExitCode::from(exit_code(api.kind))
                }
                None => ExitCode::from(2),
            }
        }
    }
}
