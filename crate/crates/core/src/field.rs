//! Grid dimensions and the in-memory floating-point field.

use crate::error::{Error, Result};

/// Grid extents, 1 to 3 axes, slowest-varying first.
///
/// A 3D field with dims `[d1, d2, d3]` stores element `(i, j, k)` at flat
/// index `(i * d2 + j) * d3 + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    extents: [usize; 3],
    rank: usize,
}

impl Dims {
    pub fn new(extents: &[usize]) -> Result<Self> {
        if extents.is_empty() || extents.len() > 3 {
            return Err(Error::BadRank(extents.len()));
        }
        let mut e = [1usize; 3];
        e[..extents.len()].copy_from_slice(extents);
        Ok(Dims {
            extents: e,
            rank: extents.len(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Extents of the declared axes only.
    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.rank]
    }

    /// Extent of one axis; undeclared axes read as 1.
    pub fn extent(&self, axis: usize) -> usize {
        self.extents[axis]
    }

    /// Total element count (product of extents).
    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A finite 32-bit float grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldF32 {
    data: Vec<f32>,
    dims: Dims,
}

impl FieldF32 {
    pub fn new(data: Vec<f32>, dims: Dims) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimsMismatch {
                dims: dims.extents().to_vec(),
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(FieldF32 { data, dims })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Index and value of the first NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<(usize, f32)> {
        self.data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
            .map(|(i, v)| (i, *v))
    }

    /// Exact minimum and maximum. Errors on an empty field.
    pub fn min_max(&self) -> Result<(f32, f32)> {
        if self.data.is_empty() {
            return Err(Error::EmptyField);
        }
        let mut min = f32::INFINITY;
        let mut max = f32::NEG_INFINITY;
        for &v in &self.data {
            min = min.min(v);
            max = max.max(v);
        }
        Ok((min, max))
    }
}
