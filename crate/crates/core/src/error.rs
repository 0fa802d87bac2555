use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {id} is out of range for a graph with {node_count} nodes")]
    InvalidNode { id: NodeId, node_count: usize },

    #[error("self-loop follow edge on node {0} is not allowed")]
    SelfLoop(NodeId),

    #[error("graph with {node_count} nodes is too small (need at least 2)")]
    DegenerateGraph { node_count: usize },

    #[error("interaction {source_node}->{target} has no backing follow edge")]
    DanglingInteraction { source_node: NodeId, target: NodeId },

    #[error("follow is a topology edge and cannot be attached as an interaction")]
    FollowAsInteraction,

    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no profile for node {0}")]
    MissingProfile(NodeId),

    #[error("node {0} is not in the candidate set")]
    NotACandidate(NodeId),

    #[error("chain of {len} nodes is too short (need at least {required})")]
    ChainTooShort { len: usize, required: usize },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("KL divergence is infinite: generated mass on {0} where the reference has none")]
    InfiniteDivergence(&'static str),

    #[error("cannot build an empirical distribution from zero records without smoothing")]
    EmptyRecords,

    #[error("invalid level table: {0}")]
    InvalidTable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient nodes: {0}")]
    InsufficientNodes(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("schema version mismatch: {0}")]
    SchemaMismatch(String),

    #[error("chain log not found at {0}")]
    MissingChainLog(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure stems from bad input (configuration, arguments or
    /// file contents) rather than the runtime environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Internal(_))
    }
}
