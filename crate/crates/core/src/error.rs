use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    #[error("self-share at record {record}: user {user} shares with itself")]
    SelfShare { record: usize, user: String },

    #[error("unknown {kind} id '{id}' at record {record} (strict mode)")]
    UnknownId {
        kind: &'static str,
        id: String,
        record: usize,
    },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{kind} index {index} out of range (< {bound} required)")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid pairwise pair: positive and negative item are both {item}")]
    InvalidPair { item: u32 },

    #[error("user {user} has interacted with every item; no negative exists")]
    NoNegative { user: u32 },

    #[error("training diverged (non-finite parameter) at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("empty candidate set for user {user}")]
    EmptyCandidates { user: u32 },
}
