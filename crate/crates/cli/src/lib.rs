//! Command-line front end for radar datagram synthesis.

pub mod args;
pub mod commands;
pub mod common;
pub mod error;

use std::io::Write;

pub use args::Cli;
pub use error::{CliError, CliResult};

/// Runs a parsed command line, printing the report and any per-frame
/// failures, and returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    match commands::dispatch(cli) {
        Ok(outcome) => {
            for f in &outcome.failures {
                let _ = writeln!(stderr, "frame {}: {}", f.frame_id, f.error);
            }
            let printed = if cli.json {
                serde_json::to_string_pretty(&outcome.json).map(|s| writeln!(stdout, "{s}"))
            } else {
                Ok(writeln!(stdout, "{}", outcome.summary))
            };
            if !matches!(printed, Ok(Ok(()))) {
                return CliError::EXIT_INVOCATION;
            }
            outcome.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            CliError::EXIT_INVOCATION
        }
    }
}
