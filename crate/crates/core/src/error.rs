use thiserror::Error;

/// A configuration value that violates its documented invariant.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid value for `{field}`: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Qualifies the field name with the config section it belongs to.
    pub fn in_section(mut self, section: &str) -> Self {
        self.field = format!("{section}.{}", self.field);
        self
    }
}

pub(crate) fn require(cond: bool, field: &str, reason: &str) -> Result<(), ValidationError> {
    if cond {
        Ok(())
    } else {
        Err(ValidationError::new(field, reason))
    }
}

pub(crate) fn positive(value: f64, field: &str) -> Result<(), ValidationError> {
    require(value.is_finite() && value > 0.0, field, "must be finite and > 0")
}

pub(crate) fn non_negative(value: f64, field: &str) -> Result<(), ValidationError> {
    require(value.is_finite() && value >= 0.0, field, "must be finite and >= 0")
}
