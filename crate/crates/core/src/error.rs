//! Shared error type for the whole library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("fixed-point iteration did not converge: residual {residual:e} after {iterations} iterations")]
    Convergence { residual: f64, iterations: usize },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("degenerate excitation: {0}")]
    Excitation(String),
    #[error("hypothesis `{0}` produced a non-finite value")]
    Evaluation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Process exit code this error maps to (config errors are 2, everything else 1).
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
