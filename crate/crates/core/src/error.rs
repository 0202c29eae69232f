use std::path::PathBuf;

use crate::graph::Vid;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    TextParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: byte offset {offset}: {msg}")]
    BinaryParse {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("vertex {vid} out of range for a graph with {node_count} nodes")]
    VidOutOfRange { vid: u64, node_count: u64 },

    #[error("invalid CSC graph: {0}")]
    InvalidCsc(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),

    #[error("batch contains vertices outside the graph: {0:?}")]
    InvalidBatch(Vec<Vid>),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("arithmetic overflow evaluating {0}")]
    Overflow(&'static str),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
