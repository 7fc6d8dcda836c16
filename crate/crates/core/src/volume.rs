//! Dense 3D grids: CT intensity volumes and binary masks.
//!
//! Both grids store voxels in z-major order: the linear index of `(z, y, x)`
//! is `(z * ny + y) * nx + x`, so `x` varies fastest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension {axis} must be >= 1")]
    ZeroDim { axis: &'static str },
    #[error("spacing {axis} must be finite and > 0, got {value}")]
    BadSpacing { axis: &'static str, value: f64 },
    #[error("data length {actual} does not match dims product {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("grid dims {left:?} and {right:?} differ")]
    DimMismatch { left: Dims, right: Dims },
}

/// Voxel counts along (z, y, x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nz: usize,
    pub ny: usize,
    pub nx: usize,
}

impl Dims {
    pub const fn new(nz: usize, ny: usize, nx: usize) -> Self {
        Self { nz, ny, nx }
    }

    pub const fn len(&self) -> usize {
        self.nz * self.ny * self.nx
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn slice_len(&self) -> usize {
        self.ny * self.nx
    }

    #[inline]
    pub const fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    #[inline]
    pub const fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.nx;
        let y = (idx / self.nx) % self.ny;
        let z = idx / self.slice_len();
        (z, y, x)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (axis, n) in [("nz", self.nz), ("ny", self.ny), ("nx", self.nx)] {
            if n == 0 {
                return Err(GridError::ZeroDim { axis });
            }
        }
        Ok(())
    }
}

impl From<(usize, usize, usize)> for Dims {
    fn from((nz, ny, nx): (usize, usize, usize)) -> Self {
        Self { nz, ny, nx }
    }
}

/// Voxel size in millimetres along (z, y, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub dz: f64,
    pub dy: f64,
    pub dx: f64,
}

impl Spacing {
    pub const fn new(dz: f64, dy: f64, dx: f64) -> Self {
        Self { dz, dy, dx }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (axis, value) in [("dz", self.dz), ("dy", self.dy), ("dx", self.dx)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::BadSpacing { axis, value });
            }
        }
        Ok(())
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

/// A CT image in Hounsfield units.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self, GridError> {
        dims.validate()?;
        spacing.validate()?;
        if data.len() != dims.len() {
            return Err(GridError::LengthMismatch {
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: f32) -> Result<Self, GridError> {
        Self::new(dims, spacing, vec![value; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.data[self.dims.index(z, y, x)]
    }
}

/// A binary segmentation aligned with a [`Volume`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    spacing: MaskSpacing,
    data: Vec<bool>,
}

// Spacing compared bitwise so that `Mask` can be `Eq`.
#[derive(Debug, Clone, Copy)]
struct MaskSpacing(Spacing);

impl PartialEq for MaskSpacing {
    fn eq(&self, other: &Self) -> bool {
        self.0.dz.to_bits() == other.0.dz.to_bits()
            && self.0.dy.to_bits() == other.0.dy.to_bits()
            && self.0.dx.to_bits() == other.0.dx.to_bits()
    }
}

impl Eq for MaskSpacing {}

impl Mask {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<bool>) -> Result<Self, GridError> {
        dims.validate()?;
        spacing.validate()?;
        if data.len() != dims.len() {
            return Err(GridError::LengthMismatch {
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(Self {
            dims,
            spacing: MaskSpacing(spacing),
            data,
        })
    }

    pub fn empty(dims: Dims, spacing: Spacing) -> Result<Self, GridError> {
        Self::new(dims, spacing, vec![false; dims.len()])
    }

    /// Builds a mask from explicit `(z, y, x)` foreground coordinates.
    pub fn from_voxels(
        dims: Dims,
        spacing: Spacing,
        voxels: &[(usize, usize, usize)],
    ) -> Result<Self, GridError> {
        let mut mask = Self::empty(dims, spacing)?;
        for &(z, y, x) in voxels {
            mask.set(z, y, x, true);
        }
        Ok(mask)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing.0
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> bool {
        self.data[self.dims.index(z, y, x)]
    }

    #[inline]
    pub fn set(&mut self, z: usize, y: usize, x: usize, value: bool) {
        let idx = self.dims.index(z, y, x);
        self.data[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Number of voxels set in both masks.
    pub fn intersection_count(&self, other: &Mask) -> Result<usize, GridError> {
        self.check_same_dims(other.dims)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn check_same_dims(&self, other: Dims) -> Result<(), GridError> {
        if self.dims != other {
            return Err(GridError::DimMismatch {
                left: self.dims,
                right: other,
            });
        }
        Ok(())
    }
}
