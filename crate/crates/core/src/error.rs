use thiserror::Error;

/// Errors raised by samplers, targets, diagnostics and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("every slot of the proposal cloud has zero mass")]
    AllMassesZero,

    #[error("acceptance weights sum to {sum}, which exceeds 1")]
    WeightBudgetExceeded { sum: f64 },

    #[error("non-finite state produced at iteration {iteration}")]
    NonFiniteState { iteration: usize },

    #[error("proposal density has no evaluable log-density")]
    MissingDensity,

    #[error("exact enumeration too large: {states} states with {proposals} proposals")]
    TooLarge { states: usize, proposals: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("chain or series is empty")]
    EmptyChain,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown sampler `{0}`")]
    UnknownSampler(String),

    #[error("unknown target `{0}`")]
    UnknownTarget(String),

    #[error("chain {chain}: {source}")]
    InChain {
        chain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that stem from a bad configuration rather than a failure while sampling.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Parse(_)
            | Error::UnknownSampler(_)
            | Error::UnknownTarget(_)
            | Error::WeightBudgetExceeded { .. }
            | Error::Dimension { .. }
            | Error::MissingDensity
            | Error::TooLarge { .. } => true,
            Error::InChain { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
