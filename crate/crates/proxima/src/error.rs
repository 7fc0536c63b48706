use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: bad dimensions, out-of-range hyperparameters,
    /// mismatched distribution families, unparseable config keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric quantity (gradient, loss, observation, reward) became
    /// non-finite. The message carries the iteration/timestep context.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// API misuse, e.g. stepping an environment past a terminal state
    /// without resetting it first.
    #[error("usage error: {0}")]
    Usage(String),

    /// Filesystem failure, annotated with the offending path.
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed checkpoint or metrics file.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
