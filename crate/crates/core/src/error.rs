use std::path::PathBuf;

use thiserror::Error;

/// Errors from constructing, reading or writing CSI data.
#[derive(Debug, Error)]
pub enum CsiError {
    #[error("invalid stream: {0}")]
    Invalid(String),

    #[error("non-finite sample at packet {packet}, antenna {antenna}, subcarrier {subcarrier}")]
    NonFiniteSample {
        packet: usize,
        antenna: usize,
        subcarrier: usize,
    },

    #[error("timestamps not strictly increasing at packet {0}")]
    TimestampOrder(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic at byte offset {offset}")]
    BadMagic { offset: u64 },

    #[error("unsupported format version {version} at byte offset {offset}")]
    UnsupportedVersion { offset: u64, version: u16 },

    #[error("invalid header field `{field}` at byte offset {offset}: {reason}")]
    BadHeader {
        offset: u64,
        field: &'static str,
        reason: String,
    },

    #[error("file truncated at byte offset {offset} (expected {expected} bytes)")]
    Truncated { offset: u64, expected: u64 },

    #[error("{extra} trailing bytes after payload at byte offset {offset}")]
    TrailingBytes { offset: u64, extra: u64 },

    #[error("timestamp not strictly increasing at byte offset {offset}")]
    NonIncreasingTimestamp { offset: u64 },

    #[error("non-finite value at byte offset {offset}")]
    NonFiniteValue { offset: u64 },

    #[error("manifest {path}, line {line}: {reason}")]
    Manifest { path: PathBuf, line: usize, reason: String },
}

impl CsiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CsiError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Errors from the synthesis and signal-processing stages.
#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable filter design: {0}")]
    UnstableFilter(String),

    #[error("degenerate streams: covariance is zero")]
    DegenerateStreams,

    #[error("frequency axes of the spectrograms differ")]
    AxisMismatch,

    #[error(transparent)]
    Csi(#[from] CsiError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn precondition(msg: impl Into<String>) -> ProcessError {
    ProcessError::Precondition(msg.into())
}
