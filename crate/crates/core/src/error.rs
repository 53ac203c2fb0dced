use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample grid is not uniform with spacing {expected_dt:e} s")]
    NonUniformGrid { expected_dt: f64 },

    #[error("sample rate {sample_rate:e} Hz violates Nyquist for {highest:e} Hz content")]
    Nyquist { sample_rate: f64, highest: f64 },

    #[error("sample rate mismatch: data at {found:e} Hz, waveform at {expected:e} Hz")]
    SampleRateMismatch { expected: f64, found: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("image {rows}x{cols} too small for a {window}-cell CFAR window")]
    ImageTooSmall { rows: usize, cols: usize, window: usize },

    #[error("image is all zero")]
    AllZero,

    #[error("no signal in either channel")]
    NoSignal,

    #[error("no detectable pulse (peak/median envelope ratio {ratio:.2})")]
    NoPulse { ratio: f64 },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

/// Failures decoding on-disk records and manifests. Each variant maps to a
/// stable numeric code (see [`FormatError::code`]).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad header: magic bytes do not match")]
    BadHeader,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },
    #[error("unknown record kind {0}")]
    UnknownKind(u8),
    #[error("truncated record: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after record payload")]
    TrailingBytes(usize),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("record dimensions overflow")]
    Oversized,
    #[error("inconsistent manifest: {0}")]
    InconsistentManifest(String),
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
}

impl FormatError {
    pub fn code(&self) -> u32 {
        match self {
            FormatError::BadHeader => 10,
            FormatError::VersionMismatch { .. } => 11,
            FormatError::UnknownKind(_) => 12,
            FormatError::Truncated { .. } => 13,
            FormatError::TrailingBytes(_) => 14,
            FormatError::NonFinite { .. } => 15,
            FormatError::Oversized => 16,
            FormatError::InconsistentManifest(_) => 17,
            FormatError::InvalidMetadata(_) => 18,
        }
    }
}
