use thiserror::Error;

/// Errors raised while building or evaluating the network model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("control {0} is not admissible for this pump station group")]
    InadmissibleControl(String),
    #[error("control {0} has no tabulated flow/power row")]
    UntabulatedControl(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid {field}: {reason}")]
    Invariant { field: String, reason: String },
}

impl ModelError {
    pub(crate) fn invariant(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Invariant {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
