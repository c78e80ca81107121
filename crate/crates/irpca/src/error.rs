use crate::matrix::MatrixError;
use thiserror::Error;

/// Crate-level error for feature preparation, solving, generation, and
/// evaluation. Low-level kernel failures bubble up as [`MatrixError`].
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{context} requires ground truth")]
    MissingGroundTruth { context: &'static str },
    #[error("numerical check failed in {context}: residual {residual:.6e}")]
    Numerical { context: &'static str, residual: f64 },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
