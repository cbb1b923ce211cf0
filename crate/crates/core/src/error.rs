use thiserror::Error;

use crate::trace::GreedyTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Exhaustive enumeration refused above the size limit.
    #[error("ground set of {n} elements exceeds the enumeration limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("oracle returned a non-finite value ({value}) for {what}")]
    NonFinite { what: &'static str, value: f64 },

    /// The round guard fired. The partial trace is kept for diagnosis.
    #[error("aborted after {limit} adaptive rounds")]
    RoundLimit { limit: u64, trace: Box<GreedyTrace> },

    #[error("malformed instance: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
