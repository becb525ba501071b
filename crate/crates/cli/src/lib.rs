//! Batch command-line front end for foreground-only CDF matching.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 when an
//! input file is malformed or cannot be processed.

pub mod args;
pub mod commands;
pub mod config;

use thiserror::Error;

pub use args::Cli;
pub use config::JobConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    use args::Command;
    match &cli.command {
        Command::BuildRef(a) => commands::build_ref(a),
        Command::Harmonize(a) => commands::harmonize_cmd(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Synth(a) => commands::synth(a),
        Command::Verify(a) => commands::verify(a),
    }
}
