//! Deterministic corruptions of a ground-truth mask, modelling typical
//! segmentation failures.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::label_components;
use crate::synth::morphology::{dilate6, erode6, translate};
use crate::synth::SynthError;
use crate::volume::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Erode,
    Dilate,
    Shift,
    DropComponents,
    ScatterOutside,
    EraseAll,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 6] = [
        Self::Erode,
        Self::Dilate,
        Self::Shift,
        Self::DropComponents,
        Self::ScatterOutside,
        Self::EraseAll,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Erode => "erode",
            Self::Dilate => "dilate",
            Self::Shift => "shift",
            Self::DropComponents => "drop_components",
            Self::ScatterOutside => "scatter_outside",
            Self::EraseAll => "erase_all",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| SynthError::UnknownKind(s.to_string()))
    }
}

/// A corruption as recorded in dataset manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub kind: CorruptionKind,
    pub magnitude: u32,
    pub seed: u64,
}

impl Corruption {
    pub fn apply(&self, gt: &Mask, lung: &Mask) -> Result<Mask, SynthError> {
        corrupt_mask(gt, lung, self.kind, self.magnitude, self.seed)
    }
}

/// Edge length of the cubes added by `scatter_outside`.
pub const SCATTER_BLOB: usize = 3;
const SCATTER_TRIES_PER_BLOB: usize = 200;

/// Applies `kind` with strength `magnitude`:
///
/// - `erode` / `dilate`: that many 6-connected morphology steps;
/// - `shift`: in-plane translation by `magnitude` voxels, pointing away from
///   the lung centre with a seeded angular jitter;
/// - `drop_components`: removes the `magnitude` smallest components;
/// - `scatter_outside`: adds `magnitude` 3×3×3 cubes lying entirely
///   outside the lung mask and away from the existing mask;
/// - `erase_all`: empty mask regardless of magnitude.
///
/// Magnitude 0 returns `gt` unchanged for every kind except `erase_all`.
pub fn corrupt_mask(gt: &Mask, lung: &Mask, kind: CorruptionKind, magnitude: u32, seed: u64) -> Result<Mask, SynthError> {
    gt.check_same_dims(lung.dims())?;
    if kind == CorruptionKind::EraseAll {
        return Ok(Mask::empty(gt.dims(), gt.spacing())?);
    }
    if magnitude == 0 {
        return Ok(gt.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        CorruptionKind::Erode => (0..magnitude).fold(gt.clone(), |m, _| erode6(&m)),
        CorruptionKind::Dilate => (0..magnitude).fold(gt.clone(), |m, _| dilate6(&m)),
        CorruptionKind::Shift => {
            let jitter = rng.random_range(-SHIFT_JITTER..SHIFT_JITTER);
            let angle = outward_angle(gt, lung).unwrap_or_else(|| rng.random_range(0.0..std::f64::consts::TAU)) + jitter;
            let m = magnitude as f64;
            let dy = (m * angle.sin()).round() as i64;
            let mut dx = (m * angle.cos()).round() as i64;
            if dy == 0 && dx == 0 {
                dx = 1;
            }
            translate(gt, (0, dy, dx))
        }
        CorruptionKind::DropComponents => {
            let labels = label_components(gt);
            let mut ids: Vec<u32> = (1..=labels.count() as u32).collect();
            ids.sort_by_key(|&id| (labels.size_of(id), id));
            let keep: Vec<u32> = ids.into_iter().skip(magnitude as usize).collect();
            labels.select(&keep, gt)
        }
        CorruptionKind::ScatterOutside => scatter_outside(gt, lung, magnitude as usize, &mut rng),
        CorruptionKind::EraseAll => unreachable!(),
    })
}

/// Largest angular deviation of a shift from the outward direction.
const SHIFT_JITTER: f64 = std::f64::consts::FRAC_PI_4;

/// In-plane angle from the centroid of the lung half holding the mask to
/// the mask's centroid, i.e. the direction in which a drifting
/// segmentation leaves the lung soonest.
fn outward_angle(gt: &Mask, lung: &Mask) -> Option<f64> {
    let dims = gt.dims();
    let centroid = |m: &Mask, half: Option<bool>| {
        let (mut n, mut sy, mut sx) = (0usize, 0.0, 0.0);
        for (i, &on) in m.data().iter().enumerate() {
            let (_, y, x) = dims.coords(i);
            if on && half.is_none_or(|right| (2 * x >= dims.nx) == right) {
                n += 1;
                sy += y as f64;
                sx += x as f64;
            }
        }
        (n > 0).then(|| (sy / n as f64, sx / n as f64))
    };
    let (my, mx) = centroid(gt, None)?;
    let (ly, lx) = centroid(lung, Some(2.0 * mx >= dims.nx as f64))?;
    let (dy, dx) = (my - ly, mx - lx);
    (dy.hypot(dx) > 1e-9).then(|| dy.atan2(dx))
}

fn scatter_outside(gt: &Mask, lung: &Mask, n: usize, rng: &mut ChaCha8Rng) -> Mask {
    let dims = gt.dims();
    let mut out = gt.clone();
    let b = SCATTER_BLOB;
    if dims.nz < b || dims.ny < b || dims.nx < b {
        return out;
    }
    let mut placed = 0;
    for _ in 0..n * SCATTER_TRIES_PER_BLOB {
        if placed == n {
            break;
        }
        let (z0, y0, x0) = (
            rng.random_range(0..=dims.nz - b),
            rng.random_range(0..=dims.ny - b),
            rng.random_range(0..=dims.nx - b),
        );
        // the cube plus a one-voxel margin must avoid the lung and the mask,
        // so every cube is a new component outside the lung
        let mut free = true;
        'check: for z in z0.saturating_sub(1)..(z0 + b + 1).min(dims.nz) {
            for y in y0.saturating_sub(1)..(y0 + b + 1).min(dims.ny) {
                for x in x0.saturating_sub(1)..(x0 + b + 1).min(dims.nx) {
                    if lung.get(z, y, x) || out.get(z, y, x) {
                        free = false;
                        break 'check;
                    }
                }
            }
        }
        if !free {
            continue;
        }
        for z in z0..z0 + b {
            for y in y0..y0 + b {
                for x in x0..x0 + b {
                    out.set(z, y, x, true);
                }
            }
        }
        placed += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::dice;
    use crate::features::lesion_containment;
    use crate::synth::{generate_phantom, PhantomParams};

    fn phantom() -> (Mask, Mask) {
        let p = generate_phantom(
            21,
            &PhantomParams {
                n_lesions: 4,
                ..PhantomParams::default()
            },
        )
        .unwrap();
        (p.gt_mask, p.lung_mask)
    }

    #[test]
    fn magnitude_zero_is_identity() {
        let (gt, lung) = phantom();
        for kind in CorruptionKind::ALL {
            let m = corrupt_mask(&gt, &lung, kind, 0, 3).unwrap();
            if kind == CorruptionKind::EraseAll {
                assert!(m.is_empty());
                assert_eq!(dice(&gt, &m).unwrap(), 0.0);
            } else {
                assert_eq!(dice(&gt, &m).unwrap(), 1.0, "{kind}");
            }
        }
    }

    #[test]
    fn kinds_behave_as_described() {
        let (gt, lung) = phantom();
        let n = gt.count();
        assert!(corrupt_mask(&gt, &lung, CorruptionKind::Erode, 1, 0).unwrap().count() < n);
        assert!(corrupt_mask(&gt, &lung, CorruptionKind::Dilate, 1, 0).unwrap().count() > n);
        let shifted = corrupt_mask(&gt, &lung, CorruptionKind::Shift, 4, 0).unwrap();
        assert!(dice(&gt, &shifted).unwrap() < 1.0);
        let dropped = corrupt_mask(&gt, &lung, CorruptionKind::DropComponents, 1, 0).unwrap();
        assert_eq!(label_components(&dropped).count(), 3);
        let smallest = *label_components(&gt).sizes().iter().min().unwrap();
        assert_eq!(dropped.count(), n - smallest);
        assert!(corrupt_mask(&gt, &lung, CorruptionKind::DropComponents, 9, 0).unwrap().is_empty());
    }

    #[test]
    fn scatter_lowers_containment() {
        let (gt, lung) = phantom();
        let m = corrupt_mask(&gt, &lung, CorruptionKind::ScatterOutside, 5, 8).unwrap();
        assert_eq!(m.count(), gt.count() + 5 * 27);
        assert_eq!(label_components(&m).count(), 4 + 5);
        let before = lesion_containment(&gt, &lung).unwrap();
        let after = lesion_containment(&m, &lung).unwrap();
        assert!(after < before);
        assert!((after - gt.count() as f64 / m.count() as f64).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_parsable() {
        let (gt, lung) = phantom();
        for kind in CorruptionKind::ALL {
            assert_eq!(
                corrupt_mask(&gt, &lung, kind, 3, 77).unwrap(),
                corrupt_mask(&gt, &lung, kind, 3, 77).unwrap()
            );
            assert_eq!(kind.as_str().parse::<CorruptionKind>().unwrap(), kind);
        }
        assert_eq!("drop-components".parse::<CorruptionKind>().unwrap(), CorruptionKind::DropComponents);
        assert!(matches!("blur".parse::<CorruptionKind>(), Err(SynthError::UnknownKind(_))));
    }
}
