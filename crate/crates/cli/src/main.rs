//! `slade`: ingest, inject, train, score, evaluate and benchmark edge streams.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

pub use commands::UsageError;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
