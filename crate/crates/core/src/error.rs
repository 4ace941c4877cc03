use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The request needs more memory than the configured budget allows.
    #[error("capacity exceeded: {what} needs {needed} bytes, budget is {budget} bytes")]
    Capacity {
        what: &'static str,
        needed: u64,
        budget: u64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("-{0} is not a fundamental discriminant")]
    NotFundamental(u64),

    /// Two computations that must agree did not; always a bug.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("{what} did not converge within {budget} evaluations")]
    NonConvergence { what: &'static str, budget: u64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
