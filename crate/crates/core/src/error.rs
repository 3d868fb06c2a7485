use thiserror::Error;

pub type Result<T> = std::result::Result<T, CalibError>;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid temperature {0}: must be finite and positive")]
    InvalidTemperature(f64),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(
        "insufficient samples: {have} samples have confidence <= {threshold}, \
         but {need} bins need at least {need}; reduce the number of bins"
    )]
    InsufficientSamples {
        have: usize,
        need: usize,
        threshold: f64,
    },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CalibError {
    pub(crate) fn empty(what: impl Into<String>) -> Self {
        CalibError::EmptyInput(what.into())
    }

    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        CalibError::InvalidInput(what.into())
    }
}
