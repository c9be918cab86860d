//! Shared fixtures for the criterion benchmarks.

use fz_core::io_corpus::{self, GeneratorKind};
use fz_core::{Dims, FieldF32};

/// A 64 MiB smooth 3D field, the standard benchmark subject.
pub fn bench_field() -> FieldF32 {
    let dims = Dims::new(&[256, 256, 256]).unwrap();
    io_corpus::generate(GeneratorKind::SineProduct, dims, 42).unwrap()
}

/// A small field for fast-feedback benches.
pub fn small_field() -> FieldF32 {
    let dims = Dims::new(&[64, 64, 64]).unwrap();
    io_corpus::generate(GeneratorKind::SmoothRandomWalk, dims, 42).unwrap()
}
