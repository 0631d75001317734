use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
    /// A server would have to answer more summations than there are rows.
    #[error("infeasible: server {server} answers {answers} summations but L = {l}")]
    Infeasible { server: usize, answers: usize, l: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A desired sub-file cannot be recovered with one summation per server.
    #[error("desired sub-file {target} not recoverable: {detail}")]
    Unrecoverable { target: usize, detail: String },
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
