use std::path::PathBuf;

/// Errors produced by the extraction and evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no frames")]
    NoFrames,

    #[error("frame gap: expected index {expected}, got {found}")]
    FrameGap { expected: usize, found: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error(
        "dimension mismatch: {} is {}x{} but {} is {}x{}",
        first.display(), first_dims.0, first_dims.1,
        second.display(), second_dims.0, second_dims.1
    )]
    DimensionMismatch {
        first: PathBuf,
        first_dims: (u32, u32),
        second: PathBuf,
        second_dims: (u32, u32),
    },

    #[error("partial frame at byte {offset}")]
    PartialFrame { offset: u64 },

    #[error("read error at byte {offset}: {source}")]
    Read {
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("fidelity undefined: {0}")]
    FidelityUndefined(&'static str),

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("compression undefined for zero total frames")]
    ZeroTotalFrames,

    #[error("malformed trace: {0}")]
    Trace(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
