use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the compression library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dims {dims:?} describe {expected} values but got {actual}")]
    DimsMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("rank {0} is unsupported (1, 2 or 3 dimensions)")]
    BadRank(usize),
    #[error("field is empty")]
    EmptyField,
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f32 },
    #[error("error bound must be positive, got {0}")]
    NonPositiveBound(f64),
    #[error("quantization code {code} at index {index} exceeds the supported range (|q| < 2^28)")]
    CodeRange { index: usize, code: f64 },
    #[error("strict mode: {count} delta(s) exceed magnitude 32767, first at index {index}")]
    StrictOverflow { index: usize, count: u64 },
    #[error("log transform requires strictly positive values, found {value} at index {index}")]
    NonPositiveLog { index: usize, value: f32 },
    #[error("shuffle tile must hold exactly 1024 words, got {0}")]
    TileSize(usize),
    #[error("slices must be at least 8x8 for SSIM, got {rows}x{cols}")]
    SliceTooSmall { rows: usize, cols: usize },
    #[error("sequences must have equal lengths, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("value must be positive, got {0}")]
    NonPositiveInput(f64),
    #[error("unknown generator kind {0:?}")]
    UnknownGenerator(String),
    #[error("file {path} holds {actual} bytes but dims require {expected}")]
    FileSize {
        path: String,
        expected: u64,
        actual: u64,
    },
    #[error("corrupt container: {0}")]
    Corrupt(#[from] CorruptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Structural defects detected while parsing or decoding a container.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorruptError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u16),
    #[error("truncated: need {needed} bytes, have {have}")]
    Truncated { needed: u64, have: u64 },
    #[error("header field {field}: {detail}")]
    HeaderField {
        field: &'static str,
        detail: String,
    },
    #[error("size law violated: header declares {declared} bytes, buffer holds {actual}")]
    SizeLaw { declared: u64, actual: u64 },
    #[error("payload holds {actual} bytes but bit flags require {expected}")]
    PayloadMismatch { expected: u64, actual: u64 },
}
