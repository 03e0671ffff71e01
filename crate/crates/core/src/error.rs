use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "unsatisfiable target: channel {channel} target ratio {target_ratio} is outside [0, 1]"
    )]
    UnsatisfiableTarget { channel: usize, target_ratio: f64 },

    #[error("shift plan has not been resolved against a tensor")]
    UnresolvedPlan,

    #[error("unknown color `{name}`; available: {}", available.join(", "))]
    UnknownColor {
        name: String,
        available: Vec<String>,
    },

    #[error("numerical failure at sampler step {step}: non-finite value")]
    NumericalFailure { step: usize },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } => 3,
            _ => 2,
        }
    }
}
