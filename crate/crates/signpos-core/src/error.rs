//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("state is not real up to a global phase (residual {residual:.3e} > tol {tol:.3e})")]
    NotRealUpToPhase { residual: f64, tol: f64 },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("unsupported boundary: {0}")]
    UnsupportedBoundary(String),

    #[error("unsupported parity: {0}")]
    UnsupportedParity(String),

    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    Convergence { iterations: usize, best_residual: f64 },

    #[error("candidate count {count} is at or above the refusal threshold {cap}; shard the range or restrict the search")]
    TooManyCandidates { count: u128, cap: u128 },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
