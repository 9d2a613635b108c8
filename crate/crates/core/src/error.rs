use thiserror::Error;

/// Errors produced by graph learning, preprocessing and the CLI pipeline.
#[derive(Debug, Error)]
pub enum GraphError {
    /// Generic invalid argument or parameter.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A matrix failed the Laplacian invariants.
    #[error("not a valid Laplacian: {0}")]
    NotLaplacian(String),

    /// Pseudo-determinant requested on a graph with more than one component.
    /// `log_pdet` still carries the sum of logs of the positive eigenvalues.
    #[error("graph is disconnected (nullity {nullity})")]
    Disconnected { nullity: usize, log_pdet: f64 },

    /// Not enough observations for the requested statistic.
    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    /// A column (asset or market series) has zero variance.
    #[error("zero variance in series `{0}`")]
    ZeroVariance(String),

    /// Non-positive price found while computing log-returns.
    #[error("non-positive price {value} at row {row} for `{ticker}`")]
    NonPositivePrice { row: usize, ticker: String, value: f64 },

    /// Input file content is malformed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;

impl GraphError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GraphError::InvalidInput(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        GraphError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
