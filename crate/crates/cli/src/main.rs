//! `thermoshadow` experiment runner.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical or resource failures.

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod config;
mod output;

fn main() -> ExitCode {
    // Usage errors exit with code 2 inside `parse`.
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
