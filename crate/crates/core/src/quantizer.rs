//! Dual quantization: error-bounded pre-quantization of the floats, then
//! Lorenzo prediction over the resulting integers, packed into 16-bit
//! sign-magnitude codes. All residual arithmetic is exact, so the only loss
//! is the pre-quantization rounding.

use crate::error::{Error, Result};
use crate::field::{Dims, FieldF32};
use crate::parallel;

/// Pre-quantized codes must satisfy |q| < 2^28 so every Lorenzo stencil sum
/// (up to 8 signed terms) stays inside i32.
pub const MAX_PREQUANT_CODE: f64 = (1u64 << 28) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbMode {
    Absolute,
    /// Relative to the value range of the field.
    Relative,
}

/// A resolved error bound: `2 * resolved_abs` is the quantization bin width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub mode: EbMode,
    /// The bound as given by the user.
    pub value: f64,
    /// The absolute bound actually applied.
    pub resolved_abs: f64,
}

impl ErrorBound {
    /// Resolves a bound against a field. Relative bounds scale by the exact
    /// value range; a zero-range (constant) field falls back to treating the
    /// relative value as absolute.
    pub fn resolve(field: &FieldF32, mode: EbMode, value: f64) -> Result<Self> {
        if field.is_empty() {
            return Err(Error::EmptyField);
        }
        let (min, max) = field.min_max()?;
        Self::from_range(mode, value, min, max)
    }

    /// Same resolution rule, given a precomputed min/max.
    pub fn from_range(mode: EbMode, value: f64, min: f32, max: f32) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveBound(value));
        }
        let resolved_abs = match mode {
            EbMode::Absolute => value,
            EbMode::Relative => {
                let range = max as f64 - min as f64;
                if range > 0.0 {
                    value * range
                } else {
                    value
                }
            }
        };
        Ok(ErrorBound {
            mode,
            value,
            resolved_abs,
        })
    }

    pub fn absolute(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveBound(value));
        }
        Ok(ErrorBound {
            mode: EbMode::Absolute,
            value,
            resolved_abs: value,
        })
    }

    /// Quantization bin width, `2 * resolved_abs`.
    pub fn bin_width(&self) -> f64 {
        2.0 * self.resolved_abs
    }
}

/// Signed pre-quantization codes on the same grid as the source field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntGrid {
    pub codes: Vec<i32>,
    pub dims: Dims,
}

/// 16-bit sign-magnitude delta codes: bit 15 is the sign, bits 0..15 the
/// magnitude. Only `0x0000` encodes zero; saturated deltas are counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedField {
    pub codes16: Vec<u16>,
    pub dims: Dims,
    pub overflow_count: u64,
    /// Index of the first saturated delta, for strict-mode reporting.
    pub first_overflow: Option<usize>,
}

fn round_half_away(x: f64) -> f64 {
    // x + 0.5 is exact for |x| < 2^51, well past the code-range guard.
    if x >= 0.0 {
        (x + 0.5).floor()
    } else {
        (x - 0.5).ceil()
    }
}

#[derive(Default)]
struct PrequantScan {
    bad: Option<(usize, BadValue)>,
}

enum BadValue {
    NonFinite(f32),
    CodeRange(f64),
}

/// Rounds every value to its bin index: `q = round(d / (2 * eb))`, half away
/// from zero. Rejects NaN/Inf inputs and codes outside the i32-safe range,
/// naming the first offending index.
pub fn prequantize(field: &FieldF32, eb: &ErrorBound, workers: usize) -> Result<IntGrid> {
    let width = eb.bin_width();
    let mut codes = vec![0i32; field.len()];
    let scans: Vec<PrequantScan> =
        parallel::map_into_with(field.data(), &mut codes, workers, |i, &d, s: &mut PrequantScan| {
            if !d.is_finite() {
                if s.bad.as_ref().is_none_or(|(j, _)| i < *j) {
                    s.bad = Some((i, BadValue::NonFinite(d)));
                }
                return 0;
            }
            let q = round_half_away(d as f64 / width);
            if q.abs() >= MAX_PREQUANT_CODE {
                if s.bad.as_ref().is_none_or(|(j, _)| i < *j) {
                    s.bad = Some((i, BadValue::CodeRange(q)));
                }
                return 0;
            }
            q as i32
        });
    for scan in scans {
        if let Some((index, bad)) = scan.bad {
            return Err(match bad {
                BadValue::NonFinite(value) => Error::NonFinite { index, value },
                BadValue::CodeRange(code) => Error::CodeRange { index, code },
            });
        }
    }
    Ok(IntGrid {
        codes,
        dims: field.dims(),
    })
}

/// Extents rearranged so the real axes sit in the trailing slots:
/// `(1, 1, n)` for rank 1 and `(1, a, b)` for rank 2. The flat layout is
/// unchanged and the degenerate leading axes contribute nothing to the
/// stencil, so the semantics per rank are exactly the standard ones.
fn normalized_extents(dims: &Dims) -> (usize, usize, usize) {
    let e = dims.extents();
    match e.len() {
        1 => (1, 1, e[0]),
        2 => (1, e[0], e[1]),
        _ => (e[0], e[1], e[2]),
    }
}

/// Prediction residuals `q - pred(q)` over the pre-quantized grid, where
/// the prediction is the order-1 Lorenzo stencil over already-visited
/// unit-cube neighbors (out-of-range neighbors read as zero):
/// 1D `q[i-1]`; 2D `q[i-1,j] + q[i,j-1] - q[i-1,j-1]`; 3D the seven signed
/// corner terms. Exact integer arithmetic; every read is of the immutable
/// input, so the pass partitions freely over rows.
pub fn lorenzo_deltas(grid: &IntGrid, workers: usize) -> Result<IntGrid> {
    let dims = grid.dims;
    if grid.codes.len() != dims.len() {
        return Err(Error::DimsMismatch {
            dims: dims.extents().to_vec(),
            expected: dims.len(),
            actual: grid.codes.len(),
        });
    }
    if grid.codes.is_empty() {
        return Ok(grid.clone());
    }
    let (d1, d2, d3) = normalized_extents(&dims);
    let codes = &grid.codes[..];
    let mut deltas = vec![0i32; codes.len()];
    let lines = d1 * d2;
    let ranges = parallel::chunk_ranges(lines, workers);
    std::thread::scope(|scope| {
        let mut rest = deltas.as_mut_slice();
        for r in ranges {
            let (chunk, tail) = rest.split_at_mut(r.len() * d3);
            rest = tail;
            scope.spawn(move || {
                for (row, out) in r.clone().zip(chunk.chunks_exact_mut(d3)) {
                    let (i, j) = (row / d2, row % d2);
                    let base = row * d3;
                    let cur = &codes[base..base + d3];
                    let up = (i > 0).then(|| &codes[base - d2 * d3..base - d2 * d3 + d3]);
                    let left = (j > 0).then(|| &codes[base - d3..base]);
                    let upleft =
                        (i > 0 && j > 0).then(|| &codes[base - d2 * d3 - d3..base - d2 * d3]);
                    row_deltas(cur, left, up, upleft, out);
                }
            });
        }
    });
    Ok(IntGrid {
        codes: deltas,
        dims,
    })
}

/// One row of the stencil: `cur` is the row itself, `left`/`up`/`upleft`
/// its predecessor rows along the middle and slow axes (when they exist).
fn row_deltas(
    cur: &[i32],
    left: Option<&[i32]>,
    up: Option<&[i32]>,
    upleft: Option<&[i32]>,
    out: &mut [i32],
) {
    let d3 = cur.len();
    let pred0 = |row: Option<&[i32]>| row.map_or(0, |r| r[0] as i64);
    out[0] = (cur[0] as i64 - pred0(left) - pred0(up) + pred0(upleft)) as i32;
    match (left, up, upleft) {
        (None, None, _) => {
            for k in 1..d3 {
                out[k] = cur[k].wrapping_sub(cur[k - 1]);
            }
        }
        (Some(l), None, _) => {
            for k in 1..d3 {
                out[k] = (cur[k] as i64 - cur[k - 1] as i64 - l[k] as i64 + l[k - 1] as i64)
                    as i32;
            }
        }
        (None, Some(u), _) => {
            for k in 1..d3 {
                out[k] = (cur[k] as i64 - cur[k - 1] as i64 - u[k] as i64 + u[k - 1] as i64)
                    as i32;
            }
        }
        (Some(l), Some(u), Some(ul)) => {
            for k in 1..d3 {
                out[k] = (cur[k] as i64 - cur[k - 1] as i64 - l[k] as i64 + l[k - 1] as i64
                    - u[k] as i64
                    + u[k - 1] as i64
                    + ul[k] as i64
                    - ul[k - 1] as i64) as i32;
            }
        }
        (Some(_), Some(_), None) => unreachable!("upleft exists when up and left do"),
    }
}

/// Exact inverse of [`lorenzo_deltas`]: an inclusive running sum along each
/// axis in turn, fastest axis first. Sums wrap on overflow so corrupt
/// payloads reconstruct to garbage instead of aborting. Each axis pass
/// partitions over independent lines, with a barrier between passes.
pub fn inverse_lorenzo(deltas: &IntGrid, workers: usize) -> Result<IntGrid> {
    let dims = deltas.dims;
    if deltas.codes.len() != dims.len() {
        return Err(Error::DimsMismatch {
            dims: dims.extents().to_vec(),
            expected: dims.len(),
            actual: deltas.codes.len(),
        });
    }
    if deltas.codes.is_empty() {
        return Ok(deltas.clone());
    }
    let mut codes = deltas.codes.clone();
    let (d1, d2, d3) = normalized_extents(&dims);

    // Axis 2 (fastest): contiguous lines of length d3.
    if d3 > 1 {
        let ranges = parallel::chunk_ranges(d1 * d2, workers);
        std::thread::scope(|scope| {
            let mut rest = codes.as_mut_slice();
            for r in ranges {
                let (chunk, tail) = rest.split_at_mut(r.len() * d3);
                rest = tail;
                scope.spawn(move || {
                    for line in chunk.chunks_exact_mut(d3) {
                        for k in 1..d3 {
                            line[k] = line[k].wrapping_add(line[k - 1]);
                        }
                    }
                });
            }
        });
    }
    // Axis 1: within each slab, add each row into its successor. The adds
    // stay contiguous over k, one slab per worker at a time.
    if d2 > 1 {
        let slab = d2 * d3;
        let ranges = parallel::chunk_ranges(d1, workers);
        std::thread::scope(|scope| {
            let mut rest = codes.as_mut_slice();
            for r in ranges {
                let (chunk, tail) = rest.split_at_mut(r.len() * slab);
                rest = tail;
                scope.spawn(move || {
                    for slab_codes in chunk.chunks_exact_mut(slab) {
                        for j in 1..d2 {
                            let (prev, cur) = slab_codes[(j - 1) * d3..(j + 1) * d3]
                                .split_at_mut(d3);
                            for (c, p) in cur.iter_mut().zip(prev.iter()) {
                                *c = c.wrapping_add(*p);
                            }
                        }
                    }
                });
            }
        });
    }
    // Axis 0: add each slab into its successor, partitioned over disjoint
    // column ranges so the sequential slab order still vectorizes.
    if d1 > 1 {
        let slab = d2 * d3;
        let ranges = parallel::chunk_ranges(slab, workers);
        struct SendPtr(*mut i32);
        unsafe impl Send for SendPtr {}
        unsafe impl Sync for SendPtr {}
        let ptr = SendPtr(codes.as_mut_ptr());
        let ptr = &ptr;
        std::thread::scope(|scope| {
            for r in ranges {
                scope.spawn(move || {
                    // Workers own disjoint column ranges of every slab.
                    for i in 1..d1 {
                        let prev = unsafe {
                            std::slice::from_raw_parts(ptr.0.add((i - 1) * slab + r.start), r.len())
                        };
                        let cur = unsafe {
                            std::slice::from_raw_parts_mut(ptr.0.add(i * slab + r.start), r.len())
                        };
                        for (c, p) in cur.iter_mut().zip(prev.iter()) {
                            *c = c.wrapping_add(*p);
                        }
                    }
                });
            }
        });
    }
    Ok(IntGrid { codes, dims })
}

/// Packs a signed delta into a 16-bit sign-magnitude code, saturating the
/// magnitude at 32767. Returns the code and whether it saturated.
#[inline]
pub fn pack_code(delta: i32) -> (u16, bool) {
    let magnitude = (delta as i64).unsigned_abs();
    let saturated = magnitude > 32767;
    let clamped = magnitude.min(32767) as u16;
    if delta < 0 {
        (0x8000 | clamped, saturated)
    } else {
        (clamped, saturated)
    }
}

/// Inverse of [`pack_code`]; `0x8000` (negative zero) decodes to 0.
#[inline]
pub fn unpack_code(code: u16) -> i32 {
    let magnitude = (code & 0x7FFF) as i32;
    if code & 0x8000 != 0 {
        -magnitude
    } else {
        magnitude
    }
}

#[derive(Default)]
struct PackScan {
    overflows: u64,
    first: Option<usize>,
}

/// Full forward pass: prequantize, Lorenzo deltas, pack.
pub fn quantize_field(field: &FieldF32, eb: &ErrorBound, workers: usize) -> Result<QuantizedField> {
    let grid = prequantize(field, eb, workers)?;
    let deltas = lorenzo_deltas(&grid, workers)?;
    drop(grid);
    let mut codes16 = vec![0u16; deltas.codes.len()];
    let scans: Vec<PackScan> =
        parallel::map_into_with(&deltas.codes, &mut codes16, workers, |i, &delta, s: &mut PackScan| {
            let (code, saturated) = pack_code(delta);
            if saturated {
                s.overflows += 1;
                if s.first.is_none() {
                    s.first = Some(i);
                }
            }
            code
        });
    let overflow_count = scans.iter().map(|s| s.overflows).sum();
    let first_overflow = scans.iter().find_map(|s| s.first);
    Ok(QuantizedField {
        codes16,
        dims: deltas.dims,
        overflow_count,
        first_overflow,
    })
}

/// Full inverse pass: unpack, invert the prediction, scale back to floats.
/// When `overflow_count == 0`, every output value is within `resolved_abs`
/// of the original up to the final f32 rounding of the bin midpoint.
pub fn dequantize_field(qf: &QuantizedField, eb: &ErrorBound, workers: usize) -> Result<FieldF32> {
    if qf.codes16.len() != qf.dims.len() {
        return Err(Error::DimsMismatch {
            dims: qf.dims.extents().to_vec(),
            expected: qf.dims.len(),
            actual: qf.codes16.len(),
        });
    }
    let mut deltas = vec![0i32; qf.codes16.len()];
    parallel::map_into(&qf.codes16, &mut deltas, workers, |_, &c| unpack_code(c));
    let grid = inverse_lorenzo(
        &IntGrid {
            codes: deltas,
            dims: qf.dims,
        },
        workers,
    )?;
    let width = eb.bin_width();
    let mut data = vec![0f32; grid.codes.len()];
    parallel::map_into(&grid.codes, &mut data, workers, |_, &q| {
        (q as f64 * width) as f32
    });
    FieldF32::new(data, qf.dims)
}
