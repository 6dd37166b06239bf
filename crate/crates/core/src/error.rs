use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible cone specification: {0}")]
    InfeasibleSpec(String),
    #[error("no certificate found: {0}")]
    NoCertificateFound(String),
    #[error("unsupported pair type: {0}")]
    UnsupportedType(String),
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
    #[error("ill-conditioned parameter point: {0}")]
    IllConditionedPoint(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
