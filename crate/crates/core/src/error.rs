use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Adapter,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty result: no names left in {0} after filtering")]
    EmptyNameList(String),

    #[error("invalid name: {0}")]
    InvalidName(String),

    #[error("cannot compose '{name}' into a pair: {reason}")]
    Composition { name: String, reason: String },

    #[error("{role} embedding set has {rows} rows after deduplication, need at least 2")]
    TooFewRows { role: String, rows: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("p = {requested} exceeds achievable rank {achievable}")]
    Rank { requested: usize, achievable: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("basis fingerprint mismatch: checkpoint has {found:016x}, basis is {expected:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },

    #[error("unbound marker {{{0}}}")]
    UnboundMarker(String),

    #[error("template has no identity marker")]
    MissingMarker,

    #[error("sequence of {len} tokens exceeds encoder maximum {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no face found in image")]
    NoFace,

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::Rank { .. }
            | Error::UnboundMarker(_)
            | Error::MissingMarker => ErrorKind::Usage,
            Error::Adapter(_) | Error::NoFace => ErrorKind::Adapter,
            _ => ErrorKind::Data,
        }
    }
}
