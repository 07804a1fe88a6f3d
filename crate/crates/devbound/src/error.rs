//! Error taxonomy shared by every module.
//!
//! Three failure classes matter to callers: inputs outside an operation's
//! domain, inputs that would force an exact integer representation past
//! what fits in floats or memory, and work that would exceed a hard
//! resource cap. The CLI maps the first two to exit code 1 and the last
//! (plus I/O) to exit code 2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    #[error("invalid input: {0}")]
    Domain(String),

    /// The operation needs exact integer counts and the sequence only
    /// carries them in log scale, or the integers exceed 2^53.
    #[error("not representable: {0}")]
    Unrepresentable(String),

    /// A documented size or time cap would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn unrepresentable(msg: impl Into<String>) -> Self {
        Error::Unrepresentable(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Unrepresentable(_) => 1,
            Error::Resource(_) | Error::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
