//! Error type shared by all widthlab modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad dimensions, parameters out of range).
    #[error("input error: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Vertex enumeration refused; callers should switch to sampling.
    #[error("vertex enumeration cap exceeded: {count} vertices > cap {cap}; use sampled mode")]
    CapExceeded { count: u128, cap: u128 },

    /// Iterative solve ran out of budget. Carries the best value found and a
    /// bound on how far it may sit above the true optimum.
    #[error("solver did not converge in {iterations} iterations: best value {best:e}, gap bound {gap:e}")]
    NonConvergence { best: f64, gap: f64, iterations: usize },

    /// A documented precondition of an operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("conditions failed: {}", failures.join("; "))]
    ConditionsFailed { failures: Vec<String> },

    #[error("iteration stagnated: {0}")]
    Stagnation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
