//! Command-line front end for sequential Monte Carlo p-value decisions.
//!
//! Subcommands cover end-to-end runs (`run`), boundary tables
//! (`boundaries`), method comparisons (`compare`), risk traces and curves
//! (`risk`), expected effort (`effort`), and spending-rate series (`rate`).
//! All outputs are deterministic given the flags and seed.

mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
