use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FriError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operation on an empty set")]
    EmptySet,
    #[error("vertex or edge outside the sampling window: {0}")]
    OutsideWindow(String),
    #[error("not a nearest-neighbour pair: {0}")]
    NotAnEdge(String),
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("centre {0} is not on the renormalization grid")]
    OffGrid(String),
    #[error("computation too large: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("runtime guard tripped: {0}")]
    Guard(String),
}

pub type Result<T> = std::result::Result<T, FriError>;

pub(crate) fn check_finite_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(FriError::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

pub(crate) fn check_finite_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(FriError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
    }
}
