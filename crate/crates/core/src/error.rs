use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected end of data")]
    UnexpectedEof,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("image is not 8-bit grayscale: {0}")]
    NotGrayscale(String),
    #[error("png decode failed: {0}")]
    Png(String),
    #[error("mask contains value {value} at index {index}; only 0 and 255 are allowed")]
    NotBinary { index: usize, value: u8 },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("no features: distance transform needs at least one feature pixel")]
    NoFeatures,
    #[error("fitness returned {value} at position {position}")]
    NonFiniteFitness { position: f64, value: f64 },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
