use std::fmt;
use std::io;
use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensor kernels, the segmentation pipeline, and file IO.
#[derive(Debug)]
pub enum Error {
    /// An operation received tensors whose shapes cannot be combined.
    ShapeMismatch { context: &'static str, detail: String },
    /// An argument violated an operation precondition.
    InvalidArgument { context: &'static str, detail: String },
    /// A memory read was attempted against a bank with no stored reference frames.
    NoReference,
    /// The first two bytes of a PNM stream are not a supported magic number.
    PnmBadMagic { offset: usize, found: String },
    /// A PNM header token is missing or not an ASCII decimal.
    PnmMalformedHeader { offset: usize, detail: String },
    /// A PNM maxval other than 255.
    PnmBadMaxval { offset: usize, maxval: u64 },
    /// The PNM pixel payload is shorter than the header promises.
    PnmTruncated { offset: usize, expected: usize, actual: usize },
    /// An unrecognized key in a config file.
    ConfigUnknownKey { line: usize, key: String },
    /// A config value failed to parse or is out of range.
    ConfigBadValue { line: usize, key: String, detail: String },
    /// A config violates a cross-field invariant.
    ConfigInvalid { detail: String },
    /// A parameter file is malformed.
    ParamsFormat { offset: usize, detail: String },
    /// Filesystem failure.
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    pub fn shape(context: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch { context, detail: detail.into() }
    }

    pub fn invalid(context: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { context, detail: detail.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for filesystem failures, as opposed to validation failures.
    /// The CLI maps these to a distinct exit code.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { context, detail } => {
                write!(f, "shape mismatch in {context}: {detail}")
            }
            Error::InvalidArgument { context, detail } => {
                write!(f, "invalid argument to {context}: {detail}")
            }
            Error::NoReference => {
                write!(f, "memory read with no reference: the memory bank is empty")
            }
            Error::PnmBadMagic { offset, found } => {
                write!(f, "unsupported PNM magic {found:?} at byte {offset} (expected P5 or P6)")
            }
            Error::PnmMalformedHeader { offset, detail } => {
                write!(f, "malformed PNM header at byte {offset}: {detail}")
            }
            Error::PnmBadMaxval { offset, maxval } => {
                write!(f, "unsupported PNM maxval {maxval} at byte {offset} (only 255)")
            }
            Error::PnmTruncated { offset, expected, actual } => {
                write!(
                    f,
                    "truncated PNM payload at byte {offset}: expected {expected} bytes, found {actual}"
                )
            }
            Error::ConfigUnknownKey { line, key } => {
                write!(f, "unknown config key {key:?} on line {line}")
            }
            Error::ConfigBadValue { line, key, detail } => {
                write!(f, "bad config value for {key:?} on line {line}: {detail}")
            }
            Error::ConfigInvalid { detail } => write!(f, "invalid config: {detail}"),
            Error::ParamsFormat { offset, detail } => {
                write!(f, "malformed parameter file at byte {offset}: {detail}")
            }
            Error::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
