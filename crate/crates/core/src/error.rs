use thiserror::Error;

#[derive(Debug, Error)]
pub enum StgpError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("location {index} at {coords:?} is not covered by any knot kernel")]
    UncoveredLocation { index: usize, coords: Vec<f64> },

    #[error("knot {0} has no neighbours; the CAR precision is singular")]
    IsolatedKnot(usize),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite log-likelihood at initialization: {0}")]
    NonFiniteLikelihood(String),

    #[error("degenerate truth: {0}")]
    DegenerateTruth(String),

    #[error("stratification failed: {0}")]
    Stratification(String),
}

pub type Result<T> = std::result::Result<T, StgpError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> StgpError {
    StgpError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
