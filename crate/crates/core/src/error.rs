use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    MagicMismatch { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("layer index {index} out of range for a graph of {len} layers")]
    LayerOutOfRange { index: usize, len: usize },
    #[error("layer {index} is a {kind}, not a Conv2d layer")]
    NotAConvLayer { index: usize, kind: &'static str },
    #[error("class {class} out of range for a {count}-class model")]
    ClassOutOfRange { class: usize, count: usize },
    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("score must be positive, got {0}")]
    NonpositiveScore(f64),
    #[error("saliency map is all zero")]
    DegenerateMap,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no eligible images ({skipped} skipped, {degenerate} degenerate)")]
    NoEligibleImages { skipped: usize, degenerate: usize },
    #[error("record {id:?} has no {field}")]
    MissingField { id: String, field: &'static str },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Format,
    Model,
    Empty,
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::InFile { .. }) => e,
            e => Error::InFile {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through path context.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    /// Stable identifier of the error variant.
    pub fn name(&self) -> &'static str {
        match self.root() {
            Error::Shape(_) => "ShapeError",
            Error::MagicMismatch { .. } => "MagicMismatch",
            Error::VersionUnsupported(_) => "VersionUnsupported",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::Parse { .. } => "ParseError",
            Error::LayerOutOfRange { .. } => "LayerOutOfRange",
            Error::NotAConvLayer { .. } => "NotAConvLayer",
            Error::ClassOutOfRange { .. } => "ClassOutOfRange",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NonpositiveScore(_) => "NonpositiveScore",
            Error::DegenerateMap => "DegenerateMap",
            Error::EmptyDataset => "EmptyDataset",
            Error::NoEligibleImages { .. } => "NoEligibleImages",
            Error::MissingField { .. } => "MissingField",
            Error::Io { .. } => "IoError",
            Error::InFile { .. } => unreachable!(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::MagicMismatch { .. }
            | Error::VersionUnsupported(_)
            | Error::TruncatedFile { .. }
            | Error::UnsupportedFormat(_)
            | Error::Parse { .. }
            | Error::MissingField { .. }
            | Error::Io { .. } => ErrorClass::Format,
            Error::Shape(_)
            | Error::LayerOutOfRange { .. }
            | Error::NotAConvLayer { .. }
            | Error::ClassOutOfRange { .. }
            | Error::IndexOutOfRange { .. }
            | Error::NonpositiveScore(_)
            | Error::DegenerateMap => ErrorClass::Model,
            Error::EmptyDataset | Error::NoEligibleImages { .. } => ErrorClass::Empty,
            Error::InFile { .. } => unreachable!(),
        }
    }
}
