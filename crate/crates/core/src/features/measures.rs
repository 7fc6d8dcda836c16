//! The per-mask quality measures: intensity mode, slice smoothness and
//! lesion containment.

use crate::features::components::LabeledComponents;
use crate::features::FeatureError;
use crate::volume::{Mask, Volume};

/// Mean intensity of `img` over the largest component of the labeling.
///
/// The maximum-likelihood Gaussian fit over those voxels has exactly this
/// mean, so no iterative fit is performed.
pub fn intensity_mode_labeled(img: &Volume, labels: &LabeledComponents) -> Result<f64, FeatureError> {
    if img.dims() != labels.dims() {
        return Err(FeatureError::DimMismatch {
            what: "image",
            expected: labels.dims(),
            actual: img.dims(),
        });
    }
    let id = labels.largest().ok_or(FeatureError::EmptyMask)?;
    let (sum, n) = labels
        .labels()
        .iter()
        .zip(img.data())
        .filter(|(&l, _)| l == id)
        .fold((0.0f64, 0usize), |(s, n), (_, &v)| (s + v as f64, n + 1));
    Ok(sum / n as f64)
}

pub fn intensity_mode(img: &Volume, m: &Mask) -> Result<f64, FeatureError> {
    intensity_mode_labeled(img, &super::label_components(m))
}

/// Per-component mean 2D Dice between consecutive axial slices, averaged
/// over components.
///
/// Slice pairs that are voxel-identical are skipped. A component with no
/// remaining pairs scores 1.0; an empty labeling scores 1.0.
pub fn smoothness_labeled(labels: &LabeledComponents) -> f64 {
    let count = labels.count();
    if count == 0 {
        return 1.0;
    }
    let dims = labels.dims();
    let plane = dims.slice_len();
    let grid = labels.labels();

    let mut dice_sum = vec![0.0f64; count + 1];
    let mut pairs = vec![0usize; count + 1];
    // scratch counters indexed by label, reset through `touched`
    let mut lower = vec![0usize; count + 1];
    let mut upper = vec![0usize; count + 1];
    let mut both = vec![0usize; count + 1];
    let mut touched: Vec<u32> = Vec::new();

    for z in 0..dims.nz.saturating_sub(1) {
        let a = &grid[z * plane..(z + 1) * plane];
        let b = &grid[(z + 1) * plane..(z + 2) * plane];
        for (&la, &lb) in a.iter().zip(b) {
            if la != 0 {
                if lower[la as usize] == 0 && upper[la as usize] == 0 {
                    touched.push(la);
                }
                lower[la as usize] += 1;
            }
            if lb != 0 {
                if lower[lb as usize] == 0 && upper[lb as usize] == 0 {
                    touched.push(lb);
                }
                upper[lb as usize] += 1;
            }
            if la != 0 && la == lb {
                both[la as usize] += 1;
            }
        }
        for &l in &touched {
            let l = l as usize;
            let (na, nb, ni) = (lower[l], upper[l], both[l]);
            // a component present in only one of the two slices ends here
            if na > 0 && nb > 0 && !(ni == na && ni == nb) {
                dice_sum[l] += 2.0 * ni as f64 / (na + nb) as f64;
                pairs[l] += 1;
            }
            lower[l] = 0;
            upper[l] = 0;
            both[l] = 0;
        }
        touched.clear();
    }

    let total: f64 = (1..=count)
        .map(|l| {
            if pairs[l] == 0 {
                1.0
            } else {
                dice_sum[l] / pairs[l] as f64
            }
        })
        .sum();
    total / count as f64
}

pub fn smoothness(m: &Mask) -> f64 {
    smoothness_labeled(&super::label_components(m))
}

/// Fraction of `m`'s voxels that lie inside `lung`; 1.0 for an empty `m`.
pub fn lesion_containment(m: &Mask, lung: &Mask) -> Result<f64, FeatureError> {
    if m.dims() != lung.dims() {
        return Err(FeatureError::DimMismatch {
            what: "lung mask",
            expected: m.dims(),
            actual: lung.dims(),
        });
    }
    let total = m.count();
    if total == 0 {
        return Ok(1.0);
    }
    let inside = m.intersection_count(lung).expect("dims checked");
    Ok(inside as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, Spacing};

    fn mask(d: (usize, usize, usize), vox: &[(usize, usize, usize)]) -> Mask {
        Mask::from_voxels(d.into(), Spacing::default(), vox).unwrap()
    }

    #[test]
    fn intensity_mode_is_mean_of_largest() {
        let d = Dims::new(1, 1, 6);
        let img = Volume::new(d, Spacing::default(), vec![-700.0, -500.0, 0.0, 50.0, 0.0, 0.0]).unwrap();
        let m = mask((1, 1, 6), &[(0, 0, 0), (0, 0, 1), (0, 0, 3)]);
        assert_eq!(intensity_mode(&img, &m).unwrap(), -600.0);

        let img = Volume::filled(d, Spacing::default(), -600.0).unwrap();
        let m = mask((1, 1, 6), &[(0, 0, 0), (0, 0, 1), (0, 0, 2)]);
        assert_eq!(intensity_mode(&img, &m).unwrap(), -600.0);
    }

    #[test]
    fn intensity_mode_empty_is_error() {
        let d = Dims::new(1, 2, 2);
        let img = Volume::filled(d, Spacing::default(), 1.0).unwrap();
        let m = Mask::empty(d, Spacing::default()).unwrap();
        assert!(matches!(intensity_mode(&img, &m), Err(FeatureError::EmptyMask)));
    }

    #[test]
    fn intensity_mode_tie_uses_lowest_id() {
        let d = Dims::new(1, 1, 5);
        let img = Volume::new(d, Spacing::default(), vec![10.0, 0.0, 0.0, 0.0, 99.0]).unwrap();
        let m = mask((1, 1, 5), &[(0, 0, 0), (0, 0, 4)]);
        assert_eq!(intensity_mode(&img, &m).unwrap(), 10.0);
    }

    #[test]
    fn single_slice_component_is_smooth() {
        assert_eq!(smoothness(&mask((3, 3, 3), &[(1, 0, 0), (1, 0, 1)])), 1.0);
    }

    #[test]
    fn identical_slices_are_skipped() {
        let m = mask((3, 2, 2), &[(0, 0, 0), (1, 0, 0), (2, 0, 0)]);
        assert_eq!(smoothness(&m), 1.0);
    }

    #[test]
    fn two_slice_dice() {
        let m = mask((2, 2, 2), &[(0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 0, 1), (1, 1, 1)]);
        assert!((smoothness(&m) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unweighted_mean_over_components() {
        // component A: single slice -> 1.0
        // component B: slices {(0,0)} then {(0,0),(1,0),(1,1)}... 2*1/(1+3) = 0.5
        let m = mask(
            (2, 4, 6),
            &[(0, 0, 5), (0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)],
        );
        let labels = crate::features::label_components(&m);
        assert_eq!(labels.count(), 2);
        assert!((smoothness_labeled(&labels) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_smoothness_is_one() {
        assert_eq!(smoothness(&mask((2, 2, 2), &[])), 1.0);
    }

    #[test]
    fn containment_cases() {
        let lung = mask((1, 2, 2), &[(0, 0, 0), (0, 0, 1)]);
        let full = mask((1, 2, 2), &[(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]);
        assert_eq!(lesion_containment(&full, &lung).unwrap(), 0.5);
        let inside = mask((1, 2, 2), &[(0, 0, 1)]);
        assert_eq!(lesion_containment(&inside, &lung).unwrap(), 1.0);
        let empty = mask((1, 2, 2), &[]);
        assert_eq!(lesion_containment(&empty, &lung).unwrap(), 1.0);
        let other = mask((2, 2, 2), &[]);
        assert!(lesion_containment(&other, &lung).is_err());
    }
}
