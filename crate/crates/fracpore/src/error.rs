//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FracporeError {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("admissibility error: {0}")]
    Admissibility(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("closure error: {0}")]
    Closure(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("linear solve error: {0}")]
    LinearSolve(String),

    #[error("linear iteration limit: {0}")]
    IterationLimit(String),

    #[error("nonlinear solver did not converge: {0}")]
    NonConvergence(String),

    #[error("outer fixed point did not converge: {0}")]
    OuterNonConvergence(String),

    #[error("simulation aborted: {0}")]
    Abort(String),

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FracporeError>;
