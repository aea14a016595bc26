//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by constructors, oracles and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input in {context}")]
    NonFinite { context: &'static str },

    #[error("index out of range: {context} (got {got}, limit {limit})")]
    IndexOutOfRange {
        context: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("infeasible schedule parameters: {0}")]
    InfeasibleSchedule(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rounds must be advanced in order: expected round {expected}, got {got}")]
    RoundOrder { expected: usize, got: usize },

    #[error("solver did not reach gap {tol} within {iterations} iterations (last gap {gap})")]
    NonConvergence {
        tol: f64,
        gap: f64,
        iterations: usize,
    },

    #[error("unsupported set kind for this operation: {0}")]
    UnsupportedSet(String),

    #[error("trace is missing diagnostics; rerun with TraceLevel::Full")]
    MissingDiagnostics,

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error("schedule fails the mixing assumptions: {0}")]
    InvalidSchedule(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}
