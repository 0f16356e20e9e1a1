use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("snapshot parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("node index {index} out of range (graph has {len} nodes)")]
    NodeOutOfRange { index: usize, len: usize },

    #[error("cannot open a channel from node {0} to itself")]
    SelfChannel(usize),

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode already finished; call reset first")]
    EpisodeDone,

    #[error("no episode in progress; call reset first")]
    NotReset,

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
