use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("theta has no entry for level {level} (covers {len} levels)")]
    IndexOutOfTheta { level: usize, len: usize },

    #[error("level mismatch: {0}")]
    LevelMismatch(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular operator: zero singular value at index {index}")]
    SingularOperator { index: usize },

    #[error("chain diverged at iteration {iter}")]
    ChainDiverged { iter: usize },

    #[error("empty candidate grid (max level {max_level})")]
    EmptyGrid { max_level: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}
