use thiserror::Error;

use crate::integrators::SchemeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scheme {scheme:?} cannot be applied: {reason}")]
    IncompatibleScheme { scheme: SchemeId, reason: String },

    #[error("implicit linear system is singular")]
    SingularSystem,

    #[error("coarse propagator matrix is numerically singular (condition {condition:e})")]
    SingularCoarse { condition: f64 },

    #[error("time step {dt} violates the stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("{what} is not finite at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("problem has no energy functional")]
    NoEnergy,

    #[error("state has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn bad(msg: impl Into<String>) -> Self {
        Error::BadParameter(msg.into())
    }
}
