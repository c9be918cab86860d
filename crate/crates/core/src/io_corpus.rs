//! Raw-binary ingestion (headerless little-endian f32, row-major, dims
//! supplied out of band) and synthetic field generation for desk-scale
//! testing.
//!
//! Generators emit values on a fixed lattice: level `j` maps to the float
//! `j * 2^-10`, with levels spanning exactly `0..=1021` (first and last
//! samples pin the extremes, so the value range is seed-independent). The
//! prime span keeps quantization-bin boundaries away from lattice points at
//! every range-relative bound of the form `a * 10^-k`, which keeps bin
//! assignment deterministic and the reconstruction strictly inside the
//! bound: `j * 10^k / 1021` can never be an odd multiple of one half. The
//! ramp uses the coordinate sum times `2^-10` directly, whose reduced
//! denominators are small and odd for the test grid sizes.
//!
//! All randomness comes from SplitMix64 (Steele et al. constants), fixed
//! here so output bytes are identical across platforms and releases. The
//! periodic generator uses a piecewise-quadratic pseudo-sine instead of
//! libm `sin`, for the same reason.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Dims, FieldF32};

/// Lattice pitch: levels scale by 2^-10.
const LEVEL_SCALE: f32 = 1.0 / 1024.0;
/// Levels span 0..=MAX_LEVEL; 1021 is prime.
const MAX_LEVEL: u32 = 1021;
/// The constant generator's value, 777 * 2^-10.
const CONSTANT_LEVEL: u32 = 777;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Constant,
    Ramp,
    SineProduct,
    UniformNoise,
    SmoothRandomWalk,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        GeneratorKind::Constant,
        GeneratorKind::Ramp,
        GeneratorKind::SineProduct,
        GeneratorKind::UniformNoise,
        GeneratorKind::SmoothRandomWalk,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::Constant => "constant",
            GeneratorKind::Ramp => "ramp",
            GeneratorKind::SineProduct => "sine-product",
            GeneratorKind::UniformNoise => "uniform-noise",
            GeneratorKind::SmoothRandomWalk => "smooth-random-walk",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(GeneratorKind::Constant),
            "ramp" => Ok(GeneratorKind::Ramp),
            "sine-product" => Ok(GeneratorKind::SineProduct),
            "uniform-noise" => Ok(GeneratorKind::UniformNoise),
            "smooth-random-walk" => Ok(GeneratorKind::SmoothRandomWalk),
            other => Err(Error::UnknownGenerator(other.to_string())),
        }
    }
}

/// SplitMix64 step.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless per-index mix, so noise generation can partition freely.
fn mix_index(seed: u64, index: u64) -> u64 {
    let mut s = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut s)
}

/// Piecewise-quadratic pseudo-sine with period 1 in `t`, range [-1, 1].
/// Pure mul/add keeps it bit-identical everywhere.
fn pseudo_sin(t: f64) -> f64 {
    let u = t - t.floor();
    if u < 0.5 {
        16.0 * u * (0.5 - u)
    } else {
        -16.0 * (u - 0.5) * (1.0 - u)
    }
}

fn level_to_value(level: u32) -> f32 {
    level as f32 * LEVEL_SCALE
}

/// Generates a deterministic field for `(kind, dims, seed)`.
pub fn generate(kind: GeneratorKind, dims: Dims, seed: u64) -> Result<FieldF32> {
    let n = dims.len();
    let mut data: Vec<f32> = match kind {
        GeneratorKind::Constant => vec![level_to_value(CONSTANT_LEVEL); n],
        GeneratorKind::Ramp => {
            let (d2, d3) = (dims.extent(1), dims.extent(2));
            (0..n)
                .map(|flat| {
                    let k = flat % d3;
                    let j = (flat / d3) % d2;
                    let i = flat / (d2 * d3);
                    (i + j + k) as f32 * LEVEL_SCALE
                })
                .collect()
        }
        GeneratorKind::SineProduct => {
            let mut s = seed;
            let mut tables: Vec<Vec<f64>> = Vec::new();
            for axis in 0..dims.rank() {
                let extent = dims.extent(axis);
                let periods = 1 + (splitmix64(&mut s) % 3) as usize;
                let phase = (splitmix64(&mut s) >> 11) as f64 / (1u64 << 53) as f64;
                tables.push(
                    (0..extent)
                        .map(|x| {
                            pseudo_sin(periods as f64 * x as f64 / extent as f64 + phase)
                        })
                        .collect(),
                );
            }
            let (d2, d3) = (dims.extent(1), dims.extent(2));
            (0..n)
                .map(|flat| {
                    let k = flat % d3;
                    let j = (flat / d3) % d2;
                    let i = flat / (d2 * d3);
                    let mut v = tables[0][i];
                    if tables.len() > 1 {
                        v *= tables[1][j];
                    }
                    if tables.len() > 2 {
                        v *= tables[2][k];
                    }
                    let level = ((v + 1.0) * 0.5 * MAX_LEVEL as f64).round() as u32;
                    level_to_value(level.min(MAX_LEVEL))
                })
                .collect()
        }
        GeneratorKind::UniformNoise => (0..n)
            .map(|i| level_to_value((mix_index(seed, i as u64) % (MAX_LEVEL as u64 + 1)) as u32))
            .collect(),
        GeneratorKind::SmoothRandomWalk => {
            let mut s = seed;
            let mut level = 0i64;
            (0..n)
                .map(|_| {
                    let step = (splitmix64(&mut s) % 9) as i64 - 4;
                    level = (level + step).clamp(0, MAX_LEVEL as i64);
                    level_to_value(level as u32)
                })
                .collect()
        }
    };
    // Pin the level extremes so the realized value range is exactly
    // MAX_LEVEL * 2^-10, independent of seed.
    if matches!(
        kind,
        GeneratorKind::SineProduct | GeneratorKind::UniformNoise | GeneratorKind::SmoothRandomWalk
    ) && n >= 2
    {
        data[0] = 0.0;
        data[n - 1] = level_to_value(MAX_LEVEL);
    }
    FieldF32::new(data, dims)
}

/// Reads a headerless little-endian f32 file. The file size must equal
/// `dims.len() * 4` exactly.
pub fn read_raw_f32(path: &Path, dims: Dims) -> Result<FieldF32> {
    let expected = dims.len() as u64 * 4;
    let meta = fs::metadata(path)?;
    if meta.len() != expected {
        return Err(Error::FileSize {
            path: path.display().to_string(),
            expected,
            actual: meta.len(),
        });
    }
    let mut bytes = Vec::with_capacity(expected as usize);
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != expected {
        return Err(Error::FileSize {
            path: path.display().to_string(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FieldF32::new(data, dims)
}

/// Writes the field as headerless little-endian f32. The raw format carries
/// no dims; callers track them out of band.
pub fn write_raw_f32(field: &FieldF32, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(field.len() * 4);
    for v in field.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Count and first index of non-finite values, for ingestion reports.
pub fn scan_non_finite(field: &FieldF32) -> Option<(usize, usize)> {
    let mut count = 0;
    let mut first = None;
    for (i, v) in field.data().iter().enumerate() {
        if !v.is_finite() {
            count += 1;
            first.get_or_insert(i);
        }
    }
    first.map(|f| (count, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(e: &[usize]) -> Dims {
        Dims::new(e).unwrap()
    }

    #[test]
    fn constant_is_constant() {
        let f = generate(GeneratorKind::Constant, dims(&[4, 5]), 9).unwrap();
        assert!(f.data().iter().all(|&v| v == 777.0 / 1024.0));
    }

    #[test]
    fn ramp_1d_is_linear() {
        let f = generate(GeneratorKind::Ramp, dims(&[100]), 0).unwrap();
        for (i, v) in f.data().iter().enumerate() {
            assert_eq!(*v, i as f32 / 1024.0);
        }
    }

    #[test]
    fn lattice_generators_pin_range() {
        for kind in [
            GeneratorKind::SineProduct,
            GeneratorKind::UniformNoise,
            GeneratorKind::SmoothRandomWalk,
        ] {
            for seed in [0u64, 7, 123456789] {
                let f = generate(kind, dims(&[64, 64]), seed).unwrap();
                let (min, max) = f.min_max().unwrap();
                assert_eq!(min, 0.0, "{kind:?} seed {seed}");
                assert_eq!(max, 1021.0 / 1024.0, "{kind:?} seed {seed}");
                // Every value sits on the lattice.
                for &v in f.data() {
                    let level = v * 1024.0;
                    assert_eq!(level.fract(), 0.0);
                    assert!(level <= 1021.0);
                }
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in GeneratorKind::ALL {
            let a = generate(kind, dims(&[17, 9]), 42).unwrap();
            let b = generate(kind, dims(&[17, 9]), 42).unwrap();
            assert_eq!(a, b);
            if !matches!(kind, GeneratorKind::Constant | GeneratorKind::Ramp) {
                let c = generate(kind, dims(&[17, 9]), 43).unwrap();
                assert_ne!(a, c, "{kind:?} ignores its seed");
            }
        }
    }

    #[test]
    fn unknown_kind_errors() {
        let e = "pink-noise".parse::<GeneratorKind>();
        assert!(matches!(e, Err(Error::UnknownGenerator(_))));
        assert_eq!("sine-product".parse::<GeneratorKind>().unwrap(), GeneratorKind::SineProduct);
    }

    #[test]
    fn raw_round_trip() {
        let dir = std::env::temp_dir().join("fz_io_corpus_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.bin");
        let f = generate(GeneratorKind::UniformNoise, dims(&[32, 16]), 5).unwrap();
        write_raw_f32(&f, &path).unwrap();
        let g = read_raw_f32(&path, dims(&[32, 16])).unwrap();
        assert_eq!(f, g);
        // Same bytes reinterpreted as rank 1.
        let flat = read_raw_f32(&path, dims(&[512])).unwrap();
        assert_eq!(flat.data(), f.data());
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn raw_size_mismatch_names_sizes() {
        let dir = std::env::temp_dir().join("fz_io_corpus_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("size_mismatch.bin");
        fs::write(&path, [0u8; 512]).unwrap();
        // 512 bytes hold 128 floats, whatever the rank.
        assert_eq!(read_raw_f32(&path, dims(&[128])).unwrap().len(), 128);
        let two_d = read_raw_f32(&path, dims(&[8, 16])).unwrap();
        assert_eq!(two_d.len(), 128);
        assert_eq!(two_d.dims().rank(), 2);
        match read_raw_f32(&path, dims(&[100])) {
            Err(Error::FileSize { expected, actual, .. }) => {
                assert_eq!(expected, 400);
                assert_eq!(actual, 512);
            }
            other => panic!("expected FileSize, got {other:?}"),
        }
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn empty_field_writes_empty_file() {
        let dir = std::env::temp_dir().join("fz_io_corpus_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.bin");
        let f = FieldF32::new(vec![], dims(&[0])).unwrap();
        write_raw_f32(&f, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 0);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn scan_reports_non_finite() {
        let f = FieldF32::new(vec![1.0, f32::NAN, f32::INFINITY, 2.0], dims(&[4])).unwrap();
        assert_eq!(scan_non_finite(&f), Some((2, 1)));
        let g = FieldF32::new(vec![1.0; 4], dims(&[4])).unwrap();
        assert_eq!(scan_non_finite(&g), None);
    }
}
