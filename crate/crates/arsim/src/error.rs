use thiserror::Error;

use crate::graph::NodeId;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("edge references unknown node {0}")]
    DanglingEndpoint(NodeId),
    #[error("node {0} is not connected to the anchor")]
    Disconnected(NodeId),
    #[error("anchor {0} is not a node of the graph")]
    MissingAnchor(NodeId),
    #[error("need at least {min} channel snapshots, got {got}")]
    InsufficientSnapshots { min: usize, got: usize },
    #[error("channel ratios are all zero")]
    ZeroChannel,
    #[error("empty peak set")]
    EmptyPeaks,
    #[error("points coincide; relative angles undefined")]
    CoincidentPoints,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    ConfigParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("graph file {path}:{line}: {message}")]
    GraphParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
