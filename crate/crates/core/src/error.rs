use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("filter support {support} exceeds period {period}")]
    SupportExceedsPeriod { support: usize, period: usize },

    #[error("period must be at least 1")]
    ZeroPeriod,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization residual {residual:e} exceeds tolerance {tolerance:e}")]
    FactorizationFailed { residual: f64, tolerance: f64 },

    #[error("knot weight must be positive, got {0}")]
    NonPositiveWeight(f64),

    #[error("bias vector violates the repeated-middle structure at index {index}")]
    BiasStructure { index: usize },

    #[error("integer overflow during lattice reduction")]
    Overflow,

    #[error("grid of {given} points per axis cannot resolve the tested frequencies; need at least {required}")]
    UnderResolvedGrid { given: usize, required: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
