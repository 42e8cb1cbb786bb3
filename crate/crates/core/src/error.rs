use thiserror::Error;

use crate::numcore::NumError;

/// Failures shared by the two key-transport protocols.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("degenerate case: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;
