use thiserror::Error;

/// Errors raised by the simulation, inversion and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    /// A linear system was singular to working precision or an iteration diverged.
    #[error("numeric failure: {message}{}", rcond.map(|r| format!(" (rcond estimate {r:.3e})")).unwrap_or_default())]
    NumericFailure { message: String, rcond: Option<f64> },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, rcond: Option<f64>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            rcond,
        }
    }

    /// Attach the index of the dataset sample being processed.
    pub fn at_sample(self, index: usize) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                index,
                source: Box::new(e),
            },
        }
    }
}
