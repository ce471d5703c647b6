//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("jacobian numerically singular: {0}")]
    SingularJacobian(String),

    #[error("matrix numerically singular")]
    SingularMatrix,

    #[error("degenerate third-order solve failed: {0}")]
    DegenerateSolve(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no mountain geometry: {0}")]
    Geometry(String),

    #[error("search stalled: {0}")]
    Stall(String),
}

pub type Result<T> = std::result::Result<T, Error>;
