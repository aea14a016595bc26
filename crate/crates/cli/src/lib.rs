//! Library half of the `dofw` binary: configuration parsing/validation and
//! the experiment runner. Kept as a library so integration tests can drive
//! the exact code paths the binary uses.

// Parameter guards are written as negations (`!(x > 0)`) so NaN falls into
// the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod runner;

/// Error classes mapped onto the binary's exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or environment (exit code 1).
    Config(String),
    /// A runtime invariant check failed (exit code 2).
    Invariant(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Invariant(msg) => write!(f, "invariant check failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

impl From<dofw_core::Error> for CliError {
    fn from(e: dofw_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
