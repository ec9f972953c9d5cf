use std::path::PathBuf;

/// Errors raised anywhere in the training pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: bad layer sizes, out-of-range hyperparameters, unknown keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments that violate an operation's preconditions.
    #[error("input error: {0}")]
    Input(String),

    /// A non-finite or otherwise unusable number surfaced during computation.
    #[error("numerical error: {context} (offending value {value})")]
    Numerical { context: String, value: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, value: f64) -> Self {
        Error::Numerical {
            context: context.into(),
            value,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
