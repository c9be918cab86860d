//! The `.fz` container format and the top-level compress/decompress
//! pipelines.
//!
//! Layout, all little endian:
//!
//! ```text
//! offset size  field
//!      0    4  magic "FZGP"
//!      4    2  format version (= 1)
//!      6    2  flags (bit 0 strict, bit 1 relative bound, bit 2 log transform)
//!      8    1  rank (1..=3)
//!      9    3  reserved
//!     12   24  dims, 3 x u64 (unused dims = 1)
//!     36    8  element count
//!     44    8  eb_abs (f64)
//!     52    8  eb_input (f64, as given by the user)
//!     60    8  overflow count
//!     68    8  tile count
//!     76    8  nonzero block count
//!     84    8  payload byte length
//!     92    4  reserved
//!     96       bit-flag section: tile_count x 32 bytes
//!      +       payload: compacted 16-byte blocks
//! ```
//!
//! Total size is exactly `96 + 32 * tile_count + payload_byte_length`. There
//! is no checksum; only structural corruption is detectable.

use crate::bitshuffle::{self, ShuffledStream, TILE_CODES, TILE_WORDS};
use crate::block_encoder::{self, TileFlags, FLAG_BYTES_PER_TILE, FLAG_WORDS_PER_TILE};
use crate::error::{CorruptError, Error, Result};
use crate::field::{Dims, FieldF32};
use crate::quantizer::{self, EbMode, ErrorBound};

pub const MAGIC: [u8; 4] = *b"FZGP";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 96;

pub const FLAG_STRICT: u16 = 1 << 0;
pub const FLAG_RELATIVE_EB: u16 = 1 << 1;
pub const FLAG_LOG_TRANSFORM: u16 = 1 << 2;

/// Fixed 96-byte container header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub flags: u16,
    pub rank: u8,
    pub dims: [u64; 3],
    pub element_count: u64,
    pub eb_abs: f64,
    pub eb_input: f64,
    pub overflow_count: u64,
    pub tile_count: u64,
    pub nonzero_block_count: u64,
    pub payload_byte_length: u64,
}

impl Header {
    pub fn total_size(&self) -> u64 {
        HEADER_BYTES as u64 + FLAG_BYTES_PER_TILE as u64 * self.tile_count + self.payload_byte_length
    }

    pub fn strict(&self) -> bool {
        self.flags & FLAG_STRICT != 0
    }

    pub fn relative_eb(&self) -> bool {
        self.flags & FLAG_RELATIVE_EB != 0
    }

    pub fn log_transformed(&self) -> bool {
        self.flags & FLAG_LOG_TRANSFORM != 0
    }

    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut b = [0u8; HEADER_BYTES];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        b[6..8].copy_from_slice(&self.flags.to_le_bytes());
        b[8] = self.rank;
        for (i, d) in self.dims.iter().enumerate() {
            b[12 + 8 * i..20 + 8 * i].copy_from_slice(&d.to_le_bytes());
        }
        b[36..44].copy_from_slice(&self.element_count.to_le_bytes());
        b[44..52].copy_from_slice(&self.eb_abs.to_le_bytes());
        b[52..60].copy_from_slice(&self.eb_input.to_le_bytes());
        b[60..68].copy_from_slice(&self.overflow_count.to_le_bytes());
        b[68..76].copy_from_slice(&self.tile_count.to_le_bytes());
        b[76..84].copy_from_slice(&self.nonzero_block_count.to_le_bytes());
        b[84..92].copy_from_slice(&self.payload_byte_length.to_le_bytes());
        b
    }

    /// Parses and structurally validates a header.
    pub fn parse(bytes: &[u8]) -> Result<Header> {
        if bytes.len() < HEADER_BYTES {
            return Err(CorruptError::Truncated {
                needed: HEADER_BYTES as u64,
                have: bytes.len() as u64,
            }
            .into());
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if bytes[0..4] != MAGIC {
            return Err(CorruptError::BadMagic.into());
        }
        let version = u16_at(4);
        if version != FORMAT_VERSION {
            return Err(CorruptError::BadVersion(version).into());
        }
        let header = Header {
            flags: u16_at(6),
            rank: bytes[8],
            dims: [u64_at(12), u64_at(20), u64_at(28)],
            element_count: u64_at(36),
            eb_abs: f64_at(44),
            eb_input: f64_at(52),
            overflow_count: u64_at(60),
            tile_count: u64_at(68),
            nonzero_block_count: u64_at(76),
            payload_byte_length: u64_at(84),
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        let fail = |field: &'static str, detail: String| {
            Err(Error::Corrupt(CorruptError::HeaderField { field, detail }))
        };
        if !(1..=3).contains(&self.rank) {
            return fail("rank", format!("{} not in 1..=3", self.rank));
        }
        for (i, &d) in self.dims.iter().enumerate() {
            if i >= self.rank as usize && d != 1 {
                return fail("dims", format!("unused dim {i} must be 1, got {d}"));
            }
        }
        let product = self.dims.iter().try_fold(1u64, |a, &d| a.checked_mul(d));
        if product != Some(self.element_count) {
            return fail(
                "element_count",
                format!("{} != product of dims {:?}", self.element_count, self.dims),
            );
        }
        let expect_tiles = self.element_count.div_ceil(TILE_CODES as u64);
        if self.tile_count != expect_tiles {
            return fail(
                "tile_count",
                format!("{} != ceil({} / {TILE_CODES})", self.tile_count, self.element_count),
            );
        }
        if self.nonzero_block_count > self.tile_count * block_encoder::BLOCKS_PER_TILE as u64 {
            return fail(
                "nonzero_block_count",
                format!("{} exceeds block capacity", self.nonzero_block_count),
            );
        }
        if self.payload_byte_length != 16 * self.nonzero_block_count {
            return fail(
                "payload_byte_length",
                format!(
                    "{} != 16 * {}",
                    self.payload_byte_length, self.nonzero_block_count
                ),
            );
        }
        if !self.eb_abs.is_finite() || self.eb_abs <= 0.0 {
            return fail("eb_abs", format!("{} not positive and finite", self.eb_abs));
        }
        Ok(())
    }

    fn dims_struct(&self) -> Result<Dims> {
        let extents: Vec<usize> = self.dims[..self.rank as usize]
            .iter()
            .map(|&d| usize::try_from(d).unwrap_or(usize::MAX))
            .collect();
        Dims::new(&extents)
    }
}

/// A parsed (or freshly built) compressed container: header, per-tile
/// bit-flag words, compacted payload.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedContainer {
    pub header: Header,
    pub flag_words: Vec<u32>,
    pub payload: Vec<u8>,
}

impl CompressedContainer {
    /// Serialized byte size, exact.
    pub fn size_bytes(&self) -> u64 {
        self.header.total_size()
    }

    /// Compression ratio: original bytes over compressed bytes.
    pub fn compression_ratio(&self) -> f64 {
        (self.header.element_count * 4) as f64 / self.size_bytes() as f64
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.size_bytes() as usize);
        out.extend_from_slice(&self.header.to_bytes());
        for w in &self.flag_words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses a serialized container, checking magic, version and the size
    /// laws. The buffer must hold exactly one container.
    pub fn parse(bytes: &[u8]) -> Result<CompressedContainer> {
        let header = Header::parse(bytes)?;
        let declared = header.total_size();
        if declared != bytes.len() as u64 {
            return Err(CorruptError::SizeLaw {
                declared,
                actual: bytes.len() as u64,
            }
            .into());
        }
        let flag_bytes = FLAG_BYTES_PER_TILE * header.tile_count as usize;
        let flag_section = &bytes[HEADER_BYTES..HEADER_BYTES + flag_bytes];
        let flag_words: Vec<u32> = flag_section
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let payload = bytes[HEADER_BYTES + flag_bytes..].to_vec();
        // The payload length law against the flags themselves.
        let set_blocks: u64 = flag_words.iter().map(|w| w.count_ones() as u64).sum();
        if set_blocks != header.nonzero_block_count {
            return Err(CorruptError::PayloadMismatch {
                expected: 16 * set_blocks,
                actual: header.payload_byte_length,
            }
            .into());
        }
        Ok(CompressedContainer {
            header,
            flag_words,
            payload,
        })
    }

    fn tile_flags(&self) -> Vec<TileFlags> {
        self.flag_words
            .chunks_exact(FLAG_WORDS_PER_TILE)
            .map(|c| TileFlags::from_bits(c.try_into().unwrap()))
            .collect()
    }
}

/// Pipeline options.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Fail on any saturated delta instead of counting it.
    pub strict: bool,
    /// Natural-log transform before quantization (strictly positive fields
    /// only); the bound then applies to the transformed values.
    pub log_transform: bool,
    pub workers: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            strict: false,
            log_transform: false,
            workers: 1,
        }
    }
}

/// Wall-clock seconds spent in each pipeline stage of the last call.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub quantize: f64,
    pub shuffle_flag: f64,
    pub encode: f64,
    pub serialize_header: f64,
}

pub enum LogDirection {
    Forward,
    Inverse,
}

/// Elementwise natural log (forward) or exp (inverse). Forward requires
/// strictly positive values.
pub fn log_transform(field: &FieldF32, direction: LogDirection) -> Result<FieldF32> {
    match direction {
        LogDirection::Forward => {
            if let Some((index, value)) = field
                .data()
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v > 0.0))
                .map(|(i, v)| (i, *v))
            {
                return Err(Error::NonPositiveLog { index, value });
            }
            let data = field.data().iter().map(|&v| v.ln()).collect();
            FieldF32::new(data, field.dims())
        }
        LogDirection::Inverse => {
            let data = field.data().iter().map(|&v| v.exp()).collect();
            FieldF32::new(data, field.dims())
        }
    }
}

/// Compresses a field under the given bound. Deterministic bytes for a
/// given `(field, mode, value, options)` regardless of worker count.
pub fn compress(
    field: &FieldF32,
    mode: EbMode,
    value: f64,
    options: &Options,
) -> Result<CompressedContainer> {
    compress_timed(field, mode, value, options).map(|(c, _)| c)
}

/// [`compress`] plus per-stage wall-clock timings, for benchmarking.
pub fn compress_timed(
    field: &FieldF32,
    mode: EbMode,
    value: f64,
    options: &Options,
) -> Result<(CompressedContainer, StageTimings)> {
    let mut timings = StageTimings::default();
    if field.is_empty() {
        return Err(Error::EmptyField);
    }
    let transformed;
    let working = if options.log_transform {
        transformed = log_transform(field, LogDirection::Forward)?;
        &transformed
    } else {
        field
    };

    let t0 = std::time::Instant::now();
    let eb = ErrorBound::resolve(working, mode, value)?;
    let quantized = quantizer::quantize_field(working, &eb, options.workers)?;
    timings.quantize = t0.elapsed().as_secs_f64();
    if options.strict && quantized.overflow_count > 0 {
        return Err(Error::StrictOverflow {
            index: quantized.first_overflow.unwrap_or(0),
            count: quantized.overflow_count,
        });
    }

    let t1 = std::time::Instant::now();
    let (stream, flags) = block_encoder::shuffle_and_flag_stream(&quantized.codes16, options.workers);
    timings.shuffle_flag = t1.elapsed().as_secs_f64();

    let t2 = std::time::Instant::now();
    let payload = block_encoder::compact_tiles(&stream.words, &flags, options.workers);
    timings.encode = t2.elapsed().as_secs_f64();

    let t3 = std::time::Instant::now();
    let nonzero_block_count: u64 = flags.iter().map(|f| f.nonzero_count as u64).sum();
    let mut flag_words = Vec::with_capacity(flags.len() * FLAG_WORDS_PER_TILE);
    for f in &flags {
        flag_words.extend_from_slice(&f.bit_flags);
    }
    let dims = field.dims();
    let mut dims_u64 = [1u64; 3];
    for (i, &d) in dims.extents().iter().enumerate() {
        dims_u64[i] = d as u64;
    }
    let mut header_flags = 0u16;
    if options.strict {
        header_flags |= FLAG_STRICT;
    }
    if mode == EbMode::Relative {
        header_flags |= FLAG_RELATIVE_EB;
    }
    if options.log_transform {
        header_flags |= FLAG_LOG_TRANSFORM;
    }
    let header = Header {
        flags: header_flags,
        rank: dims.rank() as u8,
        dims: dims_u64,
        element_count: field.len() as u64,
        eb_abs: eb.resolved_abs,
        eb_input: value,
        overflow_count: quantized.overflow_count,
        tile_count: stream.tile_count as u64,
        nonzero_block_count,
        payload_byte_length: payload.len() as u64,
    };
    timings.serialize_header = t3.elapsed().as_secs_f64();
    debug_assert_eq!(header.payload_byte_length, 16 * nonzero_block_count);
    Ok((
        CompressedContainer {
            header,
            flag_words,
            payload,
        },
        timings,
    ))
}

/// Reconstructs the field from a container. With `overflow_count == 0` the
/// result is within `eb_abs` of the original everywhere (up to the final
/// f32 rounding of each bin midpoint).
pub fn decompress(container: &CompressedContainer, workers: usize) -> Result<FieldF32> {
    let header = &container.header;
    header.validate()?;
    let dims = header.dims_struct()?;
    let element_count = usize::try_from(header.element_count)
        .map_err(|_| CorruptError::HeaderField {
            field: "element_count",
            detail: "does not fit in memory".into(),
        })
        .map_err(Error::Corrupt)?;
    if container.flag_words.len() != header.tile_count as usize * FLAG_WORDS_PER_TILE {
        return Err(CorruptError::PayloadMismatch {
            expected: header.tile_count * FLAG_BYTES_PER_TILE as u64,
            actual: 4 * container.flag_words.len() as u64,
        }
        .into());
    }
    let flags = container.tile_flags();
    let tiles = block_encoder::scatter_tiles(&flags, &container.payload, workers)?;
    debug_assert_eq!(tiles.len(), header.tile_count as usize * TILE_WORDS);
    let stream = ShuffledStream {
        words: tiles,
        tile_count: header.tile_count as usize,
        code_count: element_count,
    };
    let codes16 = bitshuffle::unshuffle_stream(&stream, workers)?;
    let quantized = quantizer::QuantizedField {
        codes16,
        dims,
        overflow_count: header.overflow_count,
        first_overflow: None,
    };
    let eb = ErrorBound::absolute(header.eb_abs)?;
    let field = quantizer::dequantize_field(&quantized, &eb, workers)?;
    if header.log_transformed() {
        log_transform(&field, LogDirection::Inverse)
    } else {
        Ok(field)
    }
}
