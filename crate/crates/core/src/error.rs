use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or invalid input data.
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite potential or objective value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Curvature matrix could not be inverted.
    #[error("singular information matrix (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("regression error: {0}")]
    Regression(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
