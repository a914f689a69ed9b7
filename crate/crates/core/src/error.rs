use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: expected {expected} tab-separated columns, got {got}")]
    MalformedRow {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}: file contains no edges")]
    EmptyGraph { path: String },
    #[error("unknown node `{0}`{}", closest_hint(.1))]
    UnknownNode(String, Vec<String>),
    #[error("node id {0} out of range (|V| = {1})")]
    InvalidNodeId(u32, usize),
    #[error("unknown edge type `{0}`")]
    UnknownEdgeType(String),
    #[error("edge type id {0} out of range (|L| = {1})")]
    InvalidEdgeTypeId(u16, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chain signature length {0} exceeds max chain length {1}")]
    ChainTooLong(usize, usize),
    #[error("tape was recorded at parameter version {tape} but parameters are at version {current}")]
    StaleTape { tape: u64, current: u64 },
    #[error("non-finite value in {0} during update; aborting")]
    NonFinite(String),
    #[error("cannot sample from an empty graph")]
    EmptySample,
    #[error("k = {0} exceeds number of points {1}")]
    BadClusterCount(usize, usize),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("config key `{0}` is not recognized")]
    UnknownConfigKey(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn closest_hint(candidates: &[String]) -> String {
    if candidates.is_empty() {
        String::new()
    } else {
        format!(" (closest matches: {})", candidates.join(", "))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
