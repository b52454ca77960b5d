//! Library side of the `dgec` binary: config parsing and the subcommand
//! implementations, kept callable from integration tests.
//!
//! Exit-code contract: 0 success (a flagged AMP divergence is still a
//! success), 1 validation error (bad flags, bad config, missing inputs),
//! 2 runtime error (solver breakdown, bridge faults, I/O).

pub mod batch;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod protocol;
pub mod reconstruct;
pub mod selftest;
pub mod simulate;

use std::fmt;

/// Environment variable naming the directory all relative output paths are
/// resolved against.
pub const OUTPUT_ROOT_ENV: &str = "DGEC_OUTPUT_ROOT";

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Two-class error so `main` can map failures onto the exit-code contract
/// without string matching.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(msg) | Self::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dgec_core::Error> for CliError {
    fn from(e: dgec_core::Error) -> Self {
        use dgec_core::Error as E;
        // Errors raised while checking a configuration are the user's to
        // fix; everything surfacing mid-run (including a bad parameter
        // wrapped in an iteration context) is a runtime failure.
        match e {
            E::InvalidParameter(_)
            | E::DimensionMismatch { .. }
            | E::MaskInfeasible(_)
            | E::ImageFormat(_)
            | E::MissingData(_) => Self::Validation(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
