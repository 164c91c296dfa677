use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: non-finite value {value} at index {index}")]
    InvalidField { index: usize, value: f64 },

    #[error("spectrum is not conjugate-symmetric (relative residue {residue:.3e})")]
    SpectrumError { residue: f64 },

    #[error("expected {expected} vector components, got {got}")]
    ArityError { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridError,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("positivity violated: min(u) = {min:.6e} at index {index}")]
    PositivityViolation { min: f64, index: usize },

    #[error("blow-up detected: {0}")]
    BlowupDetected(String),

    #[error("configuration error: {0}")]
    ConfigError(String),

    /// Every problem found in a configuration file, one per entry.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("step {step} (t = {time}): {source}")]
    StepFailed {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("truncated snapshot payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by input or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::InvalidField { .. }
            | Error::SpectrumError { .. }
            | Error::PositivityViolation { .. }
            | Error::BlowupDetected(_) => true,
            Error::StepFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
