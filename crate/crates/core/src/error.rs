use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied data that violates an operation's input requirements.
    #[error("invalid input: {0}")]
    Input(String),

    /// An operation was used outside of its contract (e.g. a tree-only query on a cyclic graph).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("node {node} is out of range for a network with {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },

    #[error("sampled node {0} has no observed timestamp")]
    MissingTimestamp(NodeId),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
