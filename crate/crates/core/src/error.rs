use thiserror::Error;

/// Errors raised across the crate.
///
/// `Data` covers malformed or unsuitable input values, `Usage` covers calls
/// that violate an operation's contract (unknown attribute, wrong dimension).
#[derive(Debug, Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn data<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Data(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
