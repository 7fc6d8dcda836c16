//! Geometric chest CT phantoms: an elliptic body cylinder in air, two
//! ellipsoidal lungs, and lesion blobs confined to the lungs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::synth::morphology::{dilate26, erode6};
use crate::synth::SynthError;
use crate::volume::{Dims, Mask, Spacing, Volume};

pub const MIN_DIMS: Dims = Dims::new(16, 32, 32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomParams {
    pub dims: Dims,
    pub spacing: Spacing,
    pub n_lesions: usize,
    /// Lesion HU is drawn uniformly per lesion from `[lo, hi)`.
    pub lesion_hu_range: (f32, f32),
    /// In-plane lesion radius range in voxels.
    pub lesion_radius_range: (f64, f64),
    pub lung_hu: f32,
    pub body_hu: f32,
    pub air_hu: f32,
    pub noise_sigma: f32,
    /// Share of lesions seeded in the outer shell of the lung, where
    /// lesions predominantly occur.
    pub peripheral_fraction: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            dims: Dims::new(24, 64, 64),
            spacing: Spacing::new(2.5, 0.7, 0.7),
            n_lesions: 3,
            lesion_hu_range: (-700.0, -100.0),
            lesion_radius_range: (2.0, 6.0),
            lung_hu: -800.0,
            body_hu: 0.0,
            air_hu: -1000.0,
            noise_sigma: 30.0,
            peripheral_fraction: 0.75,
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let d = self.dims;
        if d.nz < MIN_DIMS.nz || d.ny < MIN_DIMS.ny || d.nx < MIN_DIMS.nx {
            return Err(SynthError::TooSmall { dims: d, min: MIN_DIMS });
        }
        self.spacing.validate()?;
        let (lo, hi) = self.lesion_hu_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SynthError::InvalidParams(format!("lesion_hu_range ({lo}, {hi})")));
        }
        let (rlo, rhi) = self.lesion_radius_range;
        if !(rlo >= 1.0 && rlo <= rhi && rhi.is_finite()) {
            return Err(SynthError::InvalidParams(format!("lesion_radius_range ({rlo}, {rhi})")));
        }
        if !(0.0..=1.0).contains(&self.peripheral_fraction) {
            return Err(SynthError::InvalidParams(format!("peripheral_fraction {}", self.peripheral_fraction)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SynthError::InvalidParams(format!("noise_sigma {}", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Volume,
    pub gt_mask: Mask,
    pub lung_mask: Mask,
}

#[derive(Debug, Clone, Copy)]
struct Ellipsoid {
    c: [f64; 3],
    r: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, z: usize, y: usize, x: usize) -> bool {
        let p = [z as f64, y as f64, x as f64];
        (0..3).map(|k| ((p[k] - self.c[k]) / self.r[k]).powi(2)).sum::<f64>() <= 1.0
    }

    /// Voxel bounding box, clipped to the grid.
    fn bounds(&self, dims: Dims) -> [(usize, usize); 3] {
        let n = [dims.nz, dims.ny, dims.nx];
        std::array::from_fn(|k| {
            let lo = (self.c[k] - self.r[k]).floor().max(0.0) as usize;
            let hi = ((self.c[k] + self.r[k]).ceil() as usize).min(n[k] - 1);
            (lo, hi)
        })
    }
}

fn rasterize(mask: &mut Mask, e: &Ellipsoid) {
    let [(z0, z1), (y0, y1), (x0, x1)] = e.bounds(mask.dims());
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if e.contains(z, y, x) {
                    mask.set(z, y, x, true);
                }
            }
        }
    }
}

const PLACEMENT_TRIES: usize = 400;
/// Thickness in voxels of the lung shell used for peripheral lesions.
const PERIPHERAL_DEPTH: usize = 3;

/// Deterministic phantom for `seed`. Lesions never touch each other, so the
/// ground truth has exactly `n_lesions` connected components.
pub fn generate_phantom(seed: u64, params: &PhantomParams) -> Result<Phantom, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = params.dims;
    let (nz, ny, nx) = (dims.nz as f64, dims.ny as f64, dims.nx as f64);

    let mut lung = Mask::empty(dims, params.spacing)?;
    for side in [-1.0, 1.0] {
        let s = rng.random_range(0.9..1.05);
        let e = Ellipsoid {
            c: [(nz - 1.0) / 2.0, (ny - 1.0) / 2.0, (nx - 1.0) / 2.0 + side * 0.21 * nx],
            r: [0.42 * nz * s, 0.3 * ny * s, 0.15 * nx * s],
        };
        rasterize(&mut lung, &e);
    }

    let lung_voxels: Vec<usize> = (0..dims.len()).filter(|&i| lung.data()[i]).collect();
    let core = (0..PERIPHERAL_DEPTH).fold(lung.clone(), |m, _| erode6(&m));
    let shell: Vec<usize> = lung_voxels.iter().copied().filter(|&i| !core.data()[i]).collect();
    let mut gt = Mask::empty(dims, params.spacing)?;
    let mut lesion_hu = Vec::with_capacity(params.n_lesions);
    let mut forbidden = Mask::empty(dims, params.spacing)?;
    let (rlo, rhi) = params.lesion_radius_range;
    for placed in 0..params.n_lesions {
        let mut ok = false;
        for _ in 0..PLACEMENT_TRIES {
            let pool = if rng.random_bool(params.peripheral_fraction) { &shell } else { &lung_voxels };
            let (z, y, x) = dims.coords(pool[rng.random_range(0..pool.len())]);
            let r = if rhi > rlo { rng.random_range(rlo..rhi) } else { rlo };
            let e = Ellipsoid {
                c: [z as f64, y as f64, x as f64],
                r: [
                    (r * rng.random_range(0.5..0.8)).max(1.0),
                    r * rng.random_range(0.8..1.2),
                    r * rng.random_range(0.8..1.2),
                ],
            };
            let mut blob = Mask::empty(dims, params.spacing)?;
            rasterize(&mut blob, &e);
            let clash = blob
                .data()
                .iter()
                .zip(lung.data())
                .zip(forbidden.data())
                .any(|((&b, &l), &f)| b && l && f);
            if clash {
                continue;
            }
            for i in 0..dims.len() {
                if blob.data()[i] && lung.data()[i] {
                    gt.data_mut()[i] = true;
                }
            }
            lesion_hu.push((blob, rng.random_range(params.lesion_hu_range.0..params.lesion_hu_range.1)));
            forbidden = dilate26(&gt);
            ok = true;
            break;
        }
        if !ok {
            return Err(SynthError::PlacementFailed {
                placed,
                requested: params.n_lesions,
            });
        }
    }

    let (cy, cx) = ((ny - 1.0) / 2.0, (nx - 1.0) / 2.0);
    let (ay, ax) = (0.44 * ny, 0.47 * nx);
    let mut data = vec![params.air_hu; dims.len()];
    for (i, v) in data.iter_mut().enumerate() {
        let (_, y, x) = dims.coords(i);
        if ((y as f64 - cy) / ay).powi(2) + ((x as f64 - cx) / ax).powi(2) <= 1.0 {
            *v = params.body_hu;
        }
        if lung.data()[i] {
            *v = params.lung_hu;
        }
    }
    for (blob, hu) in &lesion_hu {
        for i in 0..dims.len() {
            if blob.data()[i] && gt.data()[i] {
                data[i] = *hu;
            }
        }
    }
    if params.noise_sigma > 0.0 {
        let noise = Normal::new(0.0f32, params.noise_sigma).expect("sigma validated");
        for v in &mut data {
            *v = (*v + noise.sample(&mut rng)).round();
        }
    } else {
        data.iter_mut().for_each(|v| *v = v.round());
    }
    Ok(Phantom {
        image: Volume::new(dims, params.spacing, data)?,
        gt_mask: gt,
        lung_mask: lung,
    })
}
