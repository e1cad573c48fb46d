use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RidgeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("divergence detected: {0}")]
    Divergence(String),
    #[error("did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },
}

impl RidgeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    pub(crate) fn rank(msg: impl Into<String>) -> Self {
        Self::RankDeficient(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }
}

pub type Result<T, E = RidgeError> = std::result::Result<T, E>;
