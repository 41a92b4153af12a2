//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad category used by the CLI to pick an exit code and by FFI callers
/// to map errors onto C-side codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    MissingInput,
    InvalidConfig,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch at layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("non-monotone timestamps at line {line}")]
    NonMonotoneTimestamps { line: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in serialized model")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("truncated stream: {0}")]
    Truncated(String),

    #[error("unknown layer tag {0}")]
    UnknownLayerTag(u8),

    #[error("huffman table invalid: {0}")]
    InvalidHuffmanTable(String),

    #[error("huffman payload corrupt: {0}")]
    CorruptPayload(String),

    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::MissingInput,
            Error::Config(_) | Error::EmptyDataset(_) | Error::CsvParse { .. } => {
                ErrorCategory::InvalidConfig
            }
            Error::NonMonotoneTimestamps { .. } => ErrorCategory::InvalidConfig,
            Error::Shape { .. } | Error::Invariant(_) => ErrorCategory::Internal,
            Error::BadMagic
            | Error::UnsupportedVersion(_)
            | Error::CrcMismatch { .. }
            | Error::Truncated(_)
            | Error::UnknownLayerTag(_)
            | Error::InvalidHuffmanTable(_)
            | Error::CorruptPayload(_) => ErrorCategory::InvalidConfig,
        }
    }

    /// Stable machine-readable name for the category, emitted by the CLI.
    pub fn category_name(&self) -> &'static str {
        match self.category() {
            ErrorCategory::MissingInput => "missing-input",
            ErrorCategory::InvalidConfig => "invalid-config",
            ErrorCategory::Internal => "internal",
        }
    }
}
