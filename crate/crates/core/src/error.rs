use thiserror::Error;

/// Failures raised by the particle engine and the pricers built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmcError {
    /// Every particle carries zero weight; the proposal no longer covers the target.
    #[error("degenerate particle cloud at step {step}: all weights are zero")]
    DegenerateCloud { step: usize },

    /// An argument lies outside the domain of a density or recursion.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The conditioned transition has no mass inside the admissible interval.
    #[error("zero survival probability from s = {s_prev}")]
    ZeroSurvival { s_prev: f64 },

    /// A drawn point has zero density under its own proposal.
    #[error("proposal support violation at step {step}, particle {particle}")]
    SupportViolation { step: usize, particle: usize },
}

pub type Result<T> = std::result::Result<T, SmcError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(SmcError::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SmcError::InvalidConfig(msg.into()))
}
