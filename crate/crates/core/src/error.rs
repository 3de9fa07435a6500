use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
///
/// Validation failures (bad parameters, malformed files) are kept apart from
/// numerical failures so the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("QZ iteration did not converge after {sweeps} sweeps (p = {dim})")]
    QzNoConvergence { sweeps: usize, dim: usize },

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_objective:e})")]
    NoConvergence {
        iterations: usize,
        best_objective: f64,
        best_point: Vec<f64>,
    },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline phase it occurred in.
    pub fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter(_) | Error::Parse { .. } | Error::Json(_) | Error::Io { .. } => {
                true
            }
            Error::Phase { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
