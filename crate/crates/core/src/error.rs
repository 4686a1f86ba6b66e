use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimator, simulator and harness.
#[derive(Debug, Error)]
pub enum IclError {
    /// An input was NaN/infinite or otherwise outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },

    /// Samples must arrive with strictly increasing time stamps.
    #[error("non-monotone sample time: {t} does not follow {last}")]
    Ordering { last: f64, t: f64 },

    /// The buffer does not (yet) hold enough history for the request.
    #[error("buffer not ready: {0}")]
    NotReady(String),

    #[error("state diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    /// The exponential envelope needs the excitation time, which was never reached.
    #[error("exponential envelope not applicable: excitation time not reached")]
    EnvelopeUnavailable,

    #[error("empty RMS window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, IclError>;

impl IclError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IclError::Io {
            path: path.into(),
            source,
        }
    }
}
