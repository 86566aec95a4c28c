//! Command implementations behind the `sltrace` binary.
//!
//! Every command renders its whole output into memory first; the binary
//! writes it in one go, so a failed run never leaves a partial file.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVE: i32 = 3;
pub const EXIT_ASSERT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("solver error: {0}")]
    Solve(#[from] sltrace::Error),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Output(_) => EXIT_CONFIG,
            CliError::Solve(_) | CliError::Certification(_) => EXIT_SOLVE,
        }
    }
}

/// Rendered command output plus the exit code it should end with.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub body: String,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

impl Outcome {
    pub fn ok(body: String) -> Self {
        Outcome { body, warnings: Vec::new(), exit_code: EXIT_OK }
    }
}
