use std::io;

use crate::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid data at point {index}: {reason}")]
    Data { index: usize, reason: String },
    #[error("cannot build a tree from an empty scene")]
    EmptyScene,
    #[error("previous cut references unknown node {0}")]
    StaleCut(NodeId),
    #[error("pose history needs at least two samples, has {0}")]
    NotReady(usize),
    #[error("crc mismatch: header {expected:#010x}, payload {actual:#010x}")]
    Crc { expected: u32, actual: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
