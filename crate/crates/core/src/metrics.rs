//! Quality and performance evaluation: pointwise error, PSNR, SSIM,
//! compression ratio, bitrate, and the modeled overall data-transfer
//! throughput.

use crate::error::{Error, Result};
use crate::field::FieldF32;

/// Default link bandwidth (GB/s) for the overall-throughput model.
pub const DEFAULT_LINK_BANDWIDTH_GB_S: f64 = 11.4;

/// Quality/performance summary for one compression run.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsReport {
    pub max_abs_err: f64,
    pub mse: f64,
    pub psnr_db: f64,
    /// Windowed structural similarity; absent for 1D fields.
    pub ssim: Option<f64>,
    pub compression_ratio: f64,
    pub bitrate_bits_per_value: f64,
    pub compress_seconds: f64,
    pub throughput_gb_per_s: f64,
    pub overall_throughput_gb_per_s: f64,
}

/// Exact sum of f64 terms via a running nonoverlapping expansion
/// (two-sum cascade). The collapsed value is the correctly rounded sum, so
/// reductions are independent of input order and of how work was split.
#[derive(Debug, Default, Clone)]
pub struct ExactSum {
    parts: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum { parts: Vec::new() }
    }

    pub fn add(&mut self, x: f64) {
        let mut carry = x;
        let mut kept = 0;
        for i in 0..self.parts.len() {
            let (sum, err) = two_sum(carry, self.parts[i]);
            if err != 0.0 {
                self.parts[kept] = err;
                kept += 1;
            }
            carry = sum;
        }
        self.parts.truncate(kept);
        if carry != 0.0 || self.parts.is_empty() {
            self.parts.push(carry);
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.parts {
            self.add(p);
        }
    }

    /// Correctly rounded total.
    pub fn value(&self) -> f64 {
        self.parts.iter().sum()
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let sum = a + b;
    let bv = sum - a;
    let av = sum - bv;
    let err = (a - av) + (b - bv);
    (sum, err)
}

fn check_pair(original: &[f32], reconstructed: &[f32]) -> Result<()> {
    if original.len() != reconstructed.len() {
        return Err(Error::LengthMismatch {
            left: original.len(),
            right: reconstructed.len(),
        });
    }
    Ok(())
}

/// Largest pointwise deviation, in double precision.
pub fn max_abs_error(original: &[f32], reconstructed: &[f32]) -> Result<f64> {
    check_pair(original, reconstructed)?;
    let mut max = 0.0f64;
    for (a, b) in original.iter().zip(reconstructed) {
        max = max.max((*a as f64 - *b as f64).abs());
    }
    Ok(max)
}

/// Mean squared error with exact accumulation; permuting the inputs cannot
/// change the result.
pub fn mse(original: &[f32], reconstructed: &[f32]) -> Result<f64> {
    check_pair(original, reconstructed)?;
    if original.is_empty() {
        return Err(Error::EmptyField);
    }
    let mut acc = ExactSum::new();
    for (a, b) in original.iter().zip(reconstructed) {
        let d = *a as f64 - *b as f64;
        acc.add(d * d);
    }
    Ok(acc.value() / original.len() as f64)
}

/// `10 log10(range^2 / MSE)` where `range` is the original's value range.
/// Identical inputs report `+inf`.
pub fn psnr(original: &[f32], reconstructed: &[f32]) -> Result<f64> {
    check_pair(original, reconstructed)?;
    if original.is_empty() {
        return Err(Error::EmptyField);
    }
    let mse = mse(original, reconstructed)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in original {
        min = min.min(v as f64);
        max = max.max(v as f64);
    }
    let range = max - min;
    Ok(10.0 * (range * range / mse).log10())
}

const SSIM_WINDOW: usize = 8;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean local SSIM over all 8x8 windows (uniform weights, stride 1) of a
/// pair of equal 2D slices. `dynamic_range` is the original field's value
/// range.
fn ssim_slice(x: &[f32], y: &[f32], rows: usize, cols: usize, dynamic_range: f64) -> Result<f64> {
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::SliceTooSmall { rows, cols });
    }
    // Summed-area tables over x, y, x^2, y^2, xy.
    let w = cols + 1;
    let mut sx = vec![0f64; (rows + 1) * w];
    let mut sy = vec![0f64; (rows + 1) * w];
    let mut sxx = vec![0f64; (rows + 1) * w];
    let mut syy = vec![0f64; (rows + 1) * w];
    let mut sxy = vec![0f64; (rows + 1) * w];
    for r in 0..rows {
        for c in 0..cols {
            let xv = x[r * cols + c] as f64;
            let yv = y[r * cols + c] as f64;
            let i = (r + 1) * w + (c + 1);
            let up = r * w + (c + 1);
            let left = (r + 1) * w + c;
            let diag = r * w + c;
            sx[i] = xv + sx[up] + sx[left] - sx[diag];
            sy[i] = yv + sy[up] + sy[left] - sy[diag];
            sxx[i] = xv * xv + sxx[up] + sxx[left] - sxx[diag];
            syy[i] = yv * yv + syy[up] + syy[left] - syy[diag];
            sxy[i] = xv * yv + sxy[up] + sxy[left] - sxy[diag];
        }
    }
    let window_sum = |s: &[f64], r: usize, c: usize| {
        s[(r + SSIM_WINDOW) * w + c + SSIM_WINDOW] - s[r * w + c + SSIM_WINDOW]
            - s[(r + SSIM_WINDOW) * w + c]
            + s[r * w + c]
    };
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let c1 = (SSIM_K1 * dynamic_range) * (SSIM_K1 * dynamic_range);
    let c2 = (SSIM_K2 * dynamic_range) * (SSIM_K2 * dynamic_range);
    let mut total = 0f64;
    let mut windows = 0u64;
    for r in 0..=rows - SSIM_WINDOW {
        for c in 0..=cols - SSIM_WINDOW {
            let mx = window_sum(&sx, r, c) / n;
            let my = window_sum(&sy, r, c) / n;
            let vx = window_sum(&sxx, r, c) / n - mx * mx;
            let vy = window_sum(&syy, r, c) / n - my * my;
            let cov = window_sum(&sxy, r, c) / n - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// SSIM between two equal-dims fields: a single slice for 2D, per-slice
/// averaged along the slowest axis for 3D. 1D fields are unsupported.
pub fn ssim(original: &FieldF32, reconstructed: &FieldF32) -> Result<f64> {
    if original.dims() != reconstructed.dims() {
        return Err(Error::LengthMismatch {
            left: original.len(),
            right: reconstructed.len(),
        });
    }
    let dims = original.dims();
    let (min, max) = original.min_max()?;
    let range = max as f64 - min as f64;
    match dims.rank() {
        2 => ssim_slice(
            original.data(),
            reconstructed.data(),
            dims.extent(0),
            dims.extent(1),
            range,
        ),
        3 => {
            let (d1, d2, d3) = (dims.extent(0), dims.extent(1), dims.extent(2));
            let slice = d2 * d3;
            let mut total = 0f64;
            for i in 0..d1 {
                total += ssim_slice(
                    &original.data()[i * slice..(i + 1) * slice],
                    &reconstructed.data()[i * slice..(i + 1) * slice],
                    d2,
                    d3,
                    range,
                )?;
            }
            Ok(total / d1 as f64)
        }
        _ => Err(Error::SliceTooSmall { rows: 1, cols: dims.len() }),
    }
}

/// Overall data-transfer throughput: the harmonic composition of the link
/// bandwidth scaled by the compression ratio with the compression
/// throughput itself. All inputs in GB/s except the dimensionless ratio.
pub fn overall_throughput(
    compress_throughput_gb_s: f64,
    compression_ratio: f64,
    link_bandwidth_gb_s: f64,
) -> Result<f64> {
    for v in [compress_throughput_gb_s, compression_ratio, link_bandwidth_gb_s] {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::NonPositiveInput(v));
        }
    }
    Ok(1.0 / (1.0 / (link_bandwidth_gb_s * compression_ratio) + 1.0 / compress_throughput_gb_s))
}

/// Bitrate in bits per value for 32-bit inputs.
pub fn bitrate(compression_ratio: f64) -> f64 {
    32.0 / compression_ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Dims;

    #[test]
    fn exact_sum_is_order_independent() {
        let mut vals: Vec<f64> = (0..2000)
            .map(|i| ((i * 2654435761u64 as usize) % 1000) as f64 * 1e-7 + 1e3)
            .collect();
        let mut a = ExactSum::new();
        for &v in &vals {
            a.add(v);
        }
        vals.reverse();
        vals.swap(10, 900);
        let mut b = ExactSum::new();
        for &v in &vals {
            b.add(v);
        }
        assert_eq!(a.value().to_bits(), b.value().to_bits());
    }

    #[test]
    fn max_err_and_mse_examples() {
        assert_eq!(max_abs_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        // One element off by 0.5 in a length-2 field.
        let m = max_abs_error(&[1.0, 2.0], &[1.5, 2.0]).unwrap();
        assert_eq!(m, 0.5);
        assert_eq!(mse(&[1.0, 2.0], &[1.5, 2.0]).unwrap(), 0.125);
    }

    #[test]
    fn mse_is_permutation_invariant() {
        let a: Vec<f32> = (0..257).map(|i| (i as f32 * 0.713).sin()).collect();
        let b: Vec<f32> = a.iter().map(|v| v + 1e-4).collect();
        let forward = mse(&a, &b).unwrap();
        let ra: Vec<f32> = a.iter().rev().copied().collect();
        let rb: Vec<f32> = b.iter().rev().copied().collect();
        assert_eq!(forward.to_bits(), mse(&ra, &rb).unwrap().to_bits());
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = vec![0.5f32; 100];
        assert!(psnr(&a, &a).unwrap().is_infinite());
    }

    #[test]
    fn psnr_uniform_error_closed_form() {
        // Range 1, uniform error 2^-10 (exact in f32 at both 0 and 1):
        // PSNR = 10 log10(1 / 2^-20) exactly.
        let orig: Vec<f32> = (0..1000).map(|i| (i % 2) as f32).collect();
        let recon: Vec<f32> = orig.iter().map(|v| v + 2f32.powi(-10)).collect();
        let p = psnr(&orig, &recon).unwrap();
        let expected = 10.0 * (2f64.powi(20)).log10();
        assert!((p - expected).abs() < 1e-12, "psnr {p} vs {expected}");
        // And the 1e-3 flavor of the same formula, to f32 accuracy.
        let recon: Vec<f32> = orig.iter().map(|v| v + 1e-3).collect();
        let p = psnr(&orig, &recon).unwrap();
        assert!((p - 60.0).abs() < 1e-2, "psnr {p}");
    }

    #[test]
    fn psnr_length_mismatch() {
        assert!(matches!(
            psnr(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn field_2d(data: Vec<f32>, rows: usize, cols: usize) -> FieldF32 {
        FieldF32::new(data, Dims::new(&[rows, cols]).unwrap()).unwrap()
    }

    #[test]
    fn ssim_identical_is_exactly_one() {
        let data: Vec<f32> = (0..64 * 64).map(|i| (i as f32 * 0.1).sin()).collect();
        let f = field_2d(data, 64, 64);
        assert_eq!(ssim(&f, &f).unwrap(), 1.0);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a: Vec<f32> = (0..32 * 32).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = a.iter().map(|v| v * 0.9 + 0.01).collect();
        let fa = field_2d(a, 32, 32);
        let fb = field_2d(b, 32, 32);
        // Same dynamic range makes the two directions comparable exactly.
        let (min, max) = fa.min_max().unwrap();
        let range = max as f64 - min as f64;
        let ab = ssim_slice(fa.data(), fb.data(), 32, 32, range).unwrap();
        let ba = ssim_slice(fb.data(), fa.data(), 32, 32, range).unwrap();
        assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn ssim_negation_matches_closed_form() {
        // Checkerboard +/-v: every 8x8 window has exactly zero mean, so
        // SSIM(x, -x) = (C2 - 2 v^2) / (C2 + 2 v^2) in every window.
        let v = 0.5f32;
        let n = 32;
        let data: Vec<f32> = (0..n * n)
            .map(|i| if (i / n + i % n) % 2 == 0 { v } else { -v })
            .collect();
        let neg: Vec<f32> = data.iter().map(|x| -x).collect();
        let fx = field_2d(data, n, n);
        let fy = field_2d(neg, n, n);
        let range = 2.0 * v as f64;
        let c2 = (SSIM_K2 * range) * (SSIM_K2 * range);
        let var = (v as f64) * (v as f64);
        let expected = (c2 - 2.0 * var) / (c2 + 2.0 * var);
        let got = ssim(&fx, &fy).unwrap();
        assert!((got - expected).abs() < 1e-9, "got {got}, expected {expected}");
        assert!(got < -0.98);
    }

    #[test]
    fn ssim_unrelated_noise_is_small() {
        let mut state = 1u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 40) as f32 / (1 << 24) as f32) - 0.5
        };
        let a: Vec<f32> = (0..256 * 256).map(|_| next()).collect();
        let b: Vec<f32> = (0..256 * 256).map(|_| next()).collect();
        let s = ssim(&field_2d(a, 256, 256), &field_2d(b, 256, 256)).unwrap();
        assert!(s.abs() < 0.2, "ssim {s}");
    }

    #[test]
    fn ssim_rejects_small_slices() {
        let f = field_2d(vec![0.0; 4 * 4], 4, 4);
        assert!(matches!(
            ssim(&f, &f),
            Err(Error::SliceTooSmall { .. })
        ));
    }

    #[test]
    fn ssim_3d_averages_slices() {
        let dims = Dims::new(&[4, 16, 16]).unwrap();
        let data: Vec<f32> = (0..4 * 256).map(|i| (i as f32 * 0.05).cos()).collect();
        let f = FieldF32::new(data, dims).unwrap();
        assert_eq!(ssim(&f, &f).unwrap(), 1.0);
    }

    #[test]
    fn overall_throughput_formula() {
        // BW=10, CR=10, Tc=100 -> (1/100 + 1/100)^-1 = 50.
        assert_eq!(overall_throughput(100.0, 10.0, 10.0).unwrap(), 50.0);
        // CR -> inf approaches the compression throughput.
        let t = overall_throughput(100.0, 1e12, 10.0).unwrap();
        assert!((t - 100.0).abs() < 1e-6);
        assert!(overall_throughput(-1.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn overall_throughput_never_exceeds_either_leg() {
        for (tc, cr, bw) in [(50.0, 3.0, 11.4), (200.0, 100.0, 1.0), (1.0, 1.0, 1.0)] {
            let t = overall_throughput(tc, cr, bw).unwrap();
            assert!(t <= bw * cr + 1e-12);
            assert!(t <= tc + 1e-12);
        }
    }

    #[test]
    fn bitrate_is_32_over_cr() {
        assert_eq!(bitrate(32.0), 1.0);
        assert_eq!(bitrate(254.5), 32.0 / 254.5);
    }
}
