use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A sparse product grew past the configured entry cap. Deliberately a
    /// hard error: letting the multiplication continue would thrash memory.
    #[error("sparse result exceeds the nnz cap of {cap} entries")]
    NnzCap { cap: usize },

    #[error("objective diverged at epoch {epoch}: {prev} -> {curr} for 3 consecutive iterations")]
    Diverged { epoch: usize, prev: f64, curr: f64 },

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
