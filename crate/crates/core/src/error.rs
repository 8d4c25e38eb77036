use thiserror::Error;

use crate::patient::PatientState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("integration produced a non-finite state at t = {time} min: {state:?}")]
    IntegrationFailure { time: f64, state: PatientState },

    #[error("target glucose {target_mgdl} mg/dL is unreachable with insulin in [0, {u_max}] mU/min")]
    TargetUnreachable { target_mgdl: f64, u_max: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: usize },

    #[error("non-finite {what} loss ({value})")]
    NonFiniteLoss { what: &'static str, value: f64 },

    #[error("episode already finished; call reset first")]
    EpisodeFinished,

    #[error("environment has not been reset")]
    NotReset,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
