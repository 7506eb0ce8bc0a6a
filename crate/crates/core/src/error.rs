use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input text is empty")]
    EmptyText,

    #[error("malformed input at position {position}: {detail}")]
    Malformed { position: usize, detail: String },

    #[error("alphabet size {sigma} exceeds text length {n}")]
    SigmaExceedsLength { sigma: u64, n: usize },

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("symbol {symbol} outside alphabet of size {sigma}")]
    BadSymbol { symbol: u64, sigma: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("keys are not strictly increasing at position {position}")]
    UnsortedKeys { position: usize },

    #[error("not a permutation: {0}")]
    MalformedPermutation(String),

    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },

    #[error("unexpected end of data")]
    Truncated,

    #[error("corrupt index: {0}")]
    Corrupt(String),

    #[error("index was built for a different text (fingerprint {expected:#018x}, text has {found:#018x})")]
    PairingMismatch { expected: u64, found: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn malformed(position: usize, detail: impl Into<String>) -> Self {
        Error::Malformed {
            position,
            detail: detail.into(),
        }
    }
}
