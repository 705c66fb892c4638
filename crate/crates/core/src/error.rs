use thiserror::Error;

/// A caller passed an argument outside an operation's domain.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid argument: {0}")]
pub struct ArgumentError(pub String);
