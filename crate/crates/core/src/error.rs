use thiserror::Error;

/// Errors raised by the model, the solver and the optimizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in `{field}`: {value}")]
    NonFinite { field: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    /// A coefficient left its admissible range while being evaluated.
    #[error("model violation in `{name}`: {value} ({reason})")]
    ModelViolation {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("inadmissible control: {0}")]
    Admissibility(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular tridiagonal system at row {row}")]
    Singular { row: usize },

    #[error("solution blew up at t = {time}: sup-norm {sup} of species {species} exceeds guard {guard}")]
    BlowUp {
        time: f64,
        species: &'static str,
        sup: f64,
        guard: f64,
    },

    #[error("base trajectory incompatible with sensitivity run: {0}")]
    SensitivityMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name: name.into(),
        reason: reason.into(),
    }
}

pub(crate) fn check_finite(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { field, value })
    }
}
