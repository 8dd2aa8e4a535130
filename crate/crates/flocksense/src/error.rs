use thiserror::Error;

use crate::engine::Violation;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An angle operation received a non-finite value.
    #[error("invalid angle: {0} is not finite")]
    NonFiniteAngle(f64),

    /// An operation that requires a nonempty input got an empty one.
    #[error("precondition violated: {0} must be nonempty")]
    EmptyInput(&'static str),

    /// A configuration field failed validation.
    #[error("invalid config: field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A scenario or trace document could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Trace data is internally inconsistent (e.g. detections referencing an
    /// unknown sensor).
    #[error("trace error: {0}")]
    Trace(String),

    /// One or more schema predicates failed with invariant enforcement on.
    #[error("invariant violation at tick {tick}: {}", format_violations(.violations))]
    InvariantViolations { tick: u64, violations: Vec<Violation> },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn invalid_config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
