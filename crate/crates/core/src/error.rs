use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Arity, shape or group mismatch between two objects that must agree.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A dense materialization would exceed the entry cap.
    #[error("dense matrix of {entries} entries exceeds cap of {cap}; use the block spectral path")]
    Capacity { entries: u128, cap: u128 },

    /// The attack cannot take a step because the gradient vanishes.
    #[error("degenerate attack: gradient norm {grad_norm} at output {output}")]
    DegenerateAttack { output: f64, grad_norm: f64 },

    #[error("numerical kernel failed: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }
}
