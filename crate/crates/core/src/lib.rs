//! Data-parallel, error-bounded lossy compression for scientific
//! floating-point grids.
//!
//! The pipeline quantizes a float grid to 16-bit sign-magnitude delta codes
//! (Lorenzo prediction over error-bounded bins), bitshuffles each 4096-byte
//! tile into bit-plane-major order, and strips the resulting all-zero
//! 16-byte blocks behind a packed bit-flag array. Decompression mirrors the
//! stages exactly. The pre-quantization rounding is the only lossy step:
//! with no saturated deltas, every reconstructed value is within the
//! resolved error bound of the original.
//!
//! All stages partition over a caller-chosen worker count and produce
//! identical bytes for any choice.

pub mod bitshuffle;
pub mod block_encoder;
pub mod container;
pub mod error;
pub mod field;
pub mod io_corpus;
pub mod metrics;
pub mod parallel;
pub mod quantizer;

pub use container::{compress, decompress, CompressedContainer, Header, Options};
pub use error::{CorruptError, Error, Result};
pub use field::{Dims, FieldF32};
pub use io_corpus::GeneratorKind;
pub use metrics::MetricsReport;
pub use quantizer::{EbMode, ErrorBound, QuantizedField};
