//! Failure kinds reported on the machine-readable error line.

use std::fmt;

use glycemic_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Config,
    MissingFile,
    Io,
    Parse,
    Version,
    InvalidParameter,
    Numerical,
    GridMismatch,
    Internal,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Config => "config",
            Kind::MissingFile => "missing-file",
            Kind::Io => "io",
            Kind::Parse => "parse",
            Kind::Version => "version",
            Kind::InvalidParameter => "invalid-parameter",
            Kind::Numerical => "numerical",
            Kind::GridMismatch => "grid-mismatch",
            Kind::Internal => "internal",
        }
    }

    /// Process exit code for this kind.
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::Numerical => 4,
            Kind::Internal => 70,
            _ => 3,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn fail(kind: Kind, message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Failure {
        kind,
        message: message.into(),
    })
}

fn core_kind(e: &CoreError) -> Kind {
    match e {
        CoreError::InvalidParameter { .. } | CoreError::ShapeMismatch { .. } | CoreError::TargetUnreachable { .. } => {
            Kind::InvalidParameter
        }
        CoreError::NonFinite(_)
        | CoreError::IntegrationFailure { .. }
        | CoreError::NonFiniteGradient { .. }
        | CoreError::NonFiniteLoss { .. } => Kind::Numerical,
        CoreError::Parse(_) | CoreError::Json(_) => Kind::Parse,
        CoreError::Version { .. } => Kind::Version,
        CoreError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => Kind::MissingFile,
        CoreError::Io(_) => Kind::Io,
        CoreError::EpisodeFinished | CoreError::NotReset => Kind::Internal,
    }
}

/// First recognised cause in the chain decides the kind.
pub fn classify(err: &anyhow::Error) -> Kind {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.kind;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return core_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return if e.kind() == std::io::ErrorKind::NotFound {
                Kind::MissingFile
            } else {
                Kind::Io
            };
        }
        if cause.downcast_ref::<csv::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return Kind::Io;
        }
    }
    Kind::Internal
}

/// `error: {"kind": ..., "message": ...}` with the full context chain as message.
pub fn error_line(err: &anyhow::Error) -> String {
    let kind = classify(err);
    let message = format!("{err:#}");
    let body = serde_json::json!({ "kind": kind.as_str(), "exit_code": kind.exit_code(), "message": message });
    format!("error: {body}")
}
