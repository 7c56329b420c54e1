use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// The variants map one-to-one onto the C error codes exposed by the FFI
/// crate, so new variants must be appended, never reordered.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a 4-DOF similarity: {0}")]
    NonSimilarity(String),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("fewer than 2 shared mark points for frame pair ({0}, {next})", next = .0 + 1)]
    InsufficientMarks(usize),
    #[error("I/O failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("frame size mismatch: {0}")]
    FrameMismatch(String),
    #[error("degenerate flow: only {valid} valid cells (need {required})")]
    DegenerateFlow { valid: usize, required: usize },
    #[error("non-finite loss at batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("signal too short: length {len}, need at least {min}")]
    SignalTooShort { len: usize, min: usize },
    #[error("bad Savitzky-Golay window {window} for polyorder {polyorder}")]
    BadWindow { window: usize, polyorder: usize },
    #[error("singular transform (|det| = {0:e})")]
    SingularTransform(f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("degenerate homography fit: {0}")]
    Degenerate(String),
    #[error("series too short: length {len}, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("homography fit failed on every frame")]
    AllFramesFailed,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
