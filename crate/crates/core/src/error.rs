use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A value failed a domain invariant (negative count, δ outside (0,1), ...).
    #[error("validation failed: {0}")]
    Validation(String),
    /// Static configuration cannot satisfy the request.
    #[error("configuration error: {0}")]
    Config(String),
    /// An exact enumeration would exceed its size guard.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    /// The requested mechanism has no exact oracle.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The budget session is closed.
    #[error("session is closed")]
    SessionClosed,
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}

macro_rules! invalid_value {
    ($($arg:tt)*) => {
        $crate::error::Error::Validation(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid;
pub(crate) use invalid_value;
