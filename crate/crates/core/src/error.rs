use thiserror::Error;

/// Errors raised by the workload toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("state ({i}, {r}) outside the bounded state space")]
    InvalidState { i: u32, r: u32 },

    #[error("unstable parameters: mean-workload denominator {denominator:e} is not positive")]
    Unstable { denominator: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("estimation stage `{stage}` failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("state space of {states} states exceeds the limit of {limit}")]
    TooLarge { states: usize, limit: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
