use thiserror::Error;

/// Errors produced by the sensing library.
///
/// The split mirrors how callers are expected to react: `Argument` and
/// `Config` mean the request itself was bad (fix the parameters and retry),
/// `Bounds` means an index or lag fell outside the data, and `Runtime`
/// covers failures that occur while a previously validated computation is
/// executing (for example a worker stage dying mid-stream).
#[derive(Debug, Error)]
pub enum Error {
    /// An input value or combination of values is invalid.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An index, lag, or window reaches past the available samples.
    #[error("out of bounds: {0}")]
    Bounds(String),

    /// A configuration struct failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A failure during execution of validated work.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn bounds(msg: impl Into<String>) -> Self {
        Error::Bounds(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn runtime(msg: impl Into<String>) -> Self {
        Error::Runtime(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
