//! Grid resampling with voxel-center alignment.
//!
//! Output voxel `i` along an axis of `n_out` voxels samples the input at
//! continuous coordinate `(i + 0.5) * n_in / n_out - 0.5`, so the first and
//! last voxel centers of both grids span the same physical extent.
//! Volumes are interpolated trilinearly; masks use nearest neighbour.

use rayon::prelude::*;

use crate::volume::{Dims, GridError, Mask, Spacing, Volume};

/// Per-axis linear interpolation taps: `(lower index, upper index, upper weight)`.
fn linear_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let last = (n_in - 1) as f64;
    (0..n_out)
        .map(|i| {
            let c = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, last);
            let lo = c.floor() as usize;
            let hi = (lo + 1).min(n_in - 1);
            (lo, hi, c - lo as f64)
        })
        .collect()
}

fn nearest_taps(n_in: usize, n_out: usize) -> Vec<usize> {
    (0..n_out)
        .map(|i| {
            let c = (i as f64 + 0.5) * n_in as f64 / n_out as f64;
            (c.floor() as usize).min(n_in - 1)
        })
        .collect()
}

fn rescaled_spacing(s: Spacing, from: Dims, to: Dims) -> Spacing {
    Spacing::new(
        s.dz * from.nz as f64 / to.nz as f64,
        s.dy * from.ny as f64 / to.ny as f64,
        s.dx * from.nx as f64 / to.nx as f64,
    )
}

/// Trilinear resampling of an intensity volume.
pub fn resample_volume(v: &Volume, target: Dims) -> Result<Volume, GridError> {
    target.validate()?;
    let src = v.dims();
    if src == target {
        return Ok(v.clone());
    }
    let tz = linear_taps(src.nz, target.nz);
    let ty = linear_taps(src.ny, target.ny);
    let tx = linear_taps(src.nx, target.nx);
    let data = v.data();
    let at = |z: usize, y: usize, x: usize| data[src.index(z, y, x)] as f64;

    let mut out = vec![0f32; target.len()];
    out.par_chunks_mut(target.slice_len())
        .zip(tz.par_iter())
        .for_each(|(slice, &(z0, z1, wz))| {
            for (yi, &(y0, y1, wy)) in ty.iter().enumerate() {
                for (xi, &(x0, x1, wx)) in tx.iter().enumerate() {
                    let c00 = at(z0, y0, x0) * (1.0 - wx) + at(z0, y0, x1) * wx;
                    let c01 = at(z0, y1, x0) * (1.0 - wx) + at(z0, y1, x1) * wx;
                    let c10 = at(z1, y0, x0) * (1.0 - wx) + at(z1, y0, x1) * wx;
                    let c11 = at(z1, y1, x0) * (1.0 - wx) + at(z1, y1, x1) * wx;
                    let c0 = c00 * (1.0 - wy) + c01 * wy;
                    let c1 = c10 * (1.0 - wy) + c11 * wy;
                    slice[yi * target.nx + xi] = (c0 * (1.0 - wz) + c1 * wz) as f32;
                }
            }
        });
    Volume::new(target, rescaled_spacing(v.spacing(), src, target), out)
}

/// Nearest-neighbour resampling of a mask; the result stays binary.
pub fn resample_mask(m: &Mask, target: Dims) -> Result<Mask, GridError> {
    target.validate()?;
    let src = m.dims();
    if src == target {
        return Ok(m.clone());
    }
    let tz = nearest_taps(src.nz, target.nz);
    let ty = nearest_taps(src.ny, target.ny);
    let tx = nearest_taps(src.nx, target.nx);
    let data = m.data();
    let mut out = vec![false; target.len()];
    out.par_chunks_mut(target.slice_len())
        .zip(tz.par_iter())
        .for_each(|(slice, &z)| {
            for (yi, &y) in ty.iter().enumerate() {
                for (xi, &x) in tx.iter().enumerate() {
                    slice[yi * target.nx + xi] = data[src.index(z, y, x)];
                }
            }
        });
    Mask::new(target, rescaled_spacing(m.spacing(), src, target), out)
}
