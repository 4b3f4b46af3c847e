use std::path::PathBuf;

use thiserror::Error;

use crate::net::MlpScoreNet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySampleSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("reference matrix has zero norm")]
    ZeroReference,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged at step {step}: validation loss is not finite")]
    Diverged {
        step: usize,
        /// Best network seen before the loss blew up.
        last_finite: Box<MlpScoreNet>,
    },

    #[error("MAP objective became non-finite")]
    NonFiniteObjective,

    #[error("i/o error on {path}: {source}")]
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
}
