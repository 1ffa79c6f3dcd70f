use thiserror::Error;

/// Errors produced anywhere in the emulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel matrix is ill-conditioned (condition estimate {condition_estimate:e})")]
    IllConditioned { condition_estimate: f64 },

    #[error("predictive variance {value:e} is negative beyond round-off")]
    NegativeVariance { value: f64 },

    #[error("fitting output {output} failed: {source}")]
    OutputFit {
        output: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("objective returned a non-finite value at {point:?}")]
    OptimizerFailure { point: Vec<f64> },

    #[error("sampler pool of {size} points is exhausted")]
    PoolExhausted { size: usize },

    #[error("duplicate node at {point:?}")]
    DuplicateNode { point: Vec<f64> },

    #[error("point {point:?} lies outside the input bounds")]
    OutOfBounds { point: Vec<f64> },

    #[error("unsupported input dimension {0}")]
    UnsupportedDimension(usize),

    #[error("simulator failure: {message}")]
    Simulator {
        message: String,
        /// Raw request/response lines of the failing exchange, when there was one.
        exchange: Option<Exchange>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One request/response pair of the external simulator protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub request: String,
    pub response: Option<String>,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn simulator(msg: impl Into<String>, exchange: Option<Exchange>) -> Self {
        Error::Simulator {
            message: msg.into(),
            exchange,
        }
    }

    /// True for errors raised by the simulator backend.
    pub fn is_simulator_failure(&self) -> bool {
        match self {
            Error::Simulator { .. } => true,
            Error::OutputFit { source, .. } => source.is_simulator_failure(),
            _ => false,
        }
    }
}
