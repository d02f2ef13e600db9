use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no cached forward pass")]
    NoForwardCache,

    #[error("output index {index} out of range for {outputs} outputs")]
    OutputIndex { index: usize, outputs: usize },

    #[error("episode exceeded the safety cap of {0} steps")]
    SafetyCapExceeded(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    BufferUnderfull { len: usize, batch: usize },

    #[error("all {0} state pairs were skipped (zero or non-finite gradients)")]
    AllPairsSkipped(usize),

    #[error("zero pooled variance")]
    ZeroPooledVariance,

    #[error("sample too small: need at least {need}, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("response maps need a 2-D state space, got {0} dimensions")]
    NotTwoDimensional(usize),

    #[error("run counts differ: {0} vs {1}")]
    RunCountMismatch(usize, usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
