use thiserror::Error;

/// Errors produced by the algebra, sampling, oracle and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("seed length mismatch: expected {expected} bits, got {got}")]
    SeedLength { expected: usize, got: usize },

    #[error("enumeration budget exceeded: {what} needs 2^{needed_bits} steps, budget is 2^{budget_bits}")]
    Budget {
        what: String,
        needed_bits: u32,
        budget_bits: u32,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("unsupported field degree {0} (supported: 1..=64)")]
    FieldDegree(u32),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
