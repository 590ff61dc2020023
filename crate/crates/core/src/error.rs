use thiserror::Error;

/// Errors raised by the collapse library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state has no components")]
    EmptyState,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("observable basis does not match the state levels")]
    BasisMismatch,
    #[error("energy grids differ: {0}")]
    GridMismatch(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical contract violated: {0}")]
    Contract(String),
    #[error("fixture parse error at line {line}: {reason}")]
    Fixture { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
