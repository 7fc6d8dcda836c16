//! Threshold-based lung segmentation used when no lung mask is supplied.

use std::collections::VecDeque;

use crate::features::components::label_components;
use crate::features::FeatureError;
use crate::volume::{Mask, Volume};

/// Voxels darker than this (HU) are lung or air candidates.
pub const LUNG_THRESHOLD_HU: f32 = -320.0;

/// Segments the lungs as the two largest sub-threshold components that do
/// not touch the in-plane border, with per-slice hole filling.
pub fn heuristic_lung_mask(img: &Volume) -> Result<Mask, FeatureError> {
    let dims = img.dims();
    let candidate = Mask::new(
        dims,
        img.spacing(),
        img.data().iter().map(|&v| v < LUNG_THRESHOLD_HU).collect(),
    )
    .expect("same dims as image");
    let labels = label_components(&candidate);

    let mut touches_border = vec![false; labels.count() + 1];
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                if y == 0 || x == 0 || y + 1 == dims.ny || x + 1 == dims.nx {
                    touches_border[labels.labels()[dims.index(z, y, x)] as usize] = true;
                }
            }
        }
    }
    let keep: Vec<u32> = labels
        .ids_by_size()
        .into_iter()
        .filter(|&id| !touches_border[id as usize])
        .take(2)
        .collect();
    if keep.is_empty() {
        return Err(FeatureError::NoLungFound);
    }
    let mut lung = labels.select(&keep, &candidate);
    fill_slice_holes(&mut lung);
    Ok(lung)
}

/// Fills background regions of each axial slice that are not 4-connected
/// to the slice border.
pub fn fill_slice_holes(mask: &mut Mask) {
    let dims = mask.dims();
    let (ny, nx) = (dims.ny, dims.nx);
    let plane = dims.slice_len();
    let mut outside = vec![false; plane];
    let mut queue = VecDeque::new();
    for z in 0..dims.nz {
        let slice = &mut mask.data_mut()[z * plane..(z + 1) * plane];
        outside.iter_mut().for_each(|o| *o = false);
        for y in 0..ny {
            for x in 0..nx {
                let on_border = y == 0 || x == 0 || y + 1 == ny || x + 1 == nx;
                let i = y * nx + x;
                if on_border && !slice[i] && !outside[i] {
                    outside[i] = true;
                    queue.push_back(i);
                }
            }
        }
        while let Some(i) = queue.pop_front() {
            let (y, x) = (i / nx, i % nx);
            let mut visit = |j: usize| {
                if !slice[j] && !outside[j] {
                    outside[j] = true;
                    queue.push_back(j);
                }
            };
            if y > 0 {
                visit(i - nx);
            }
            if y + 1 < ny {
                visit(i + nx);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < nx {
                visit(i + 1);
            }
        }
        for (v, &o) in slice.iter_mut().zip(&outside) {
            if !o {
                *v = true;
            }
        }
    }
}
