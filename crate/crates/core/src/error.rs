use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("matrix is singular or ill-conditioned (condition number {cond:e})")]
    Singular { cond: f64 },

    #[error("estimate on the parameter boundary ({0}); use a profile-likelihood or Bayesian interval instead")]
    Boundary(String),

    #[error("design matrix is rank deficient; dependent columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("chain {chain} produced a non-finite log posterior at iteration {iteration}")]
    NonFiniteChain { chain: usize, iteration: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
