use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two vectors that must be paired have different lengths.
    #[error("length mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A numeric argument lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structural validation failed (empty input, weights not summing to K, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown procedure `{id}`; registered identifiers: {known}")]
    UnknownProcedure { id: String, known: String },

    #[error("leave-one-out lift requires an estimator declared coordinate-wise monotone")]
    NonMonotone,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub(crate) fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {value}")))
    }
}
