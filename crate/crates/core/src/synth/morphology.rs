//! Binary morphology on masks. Voxels outside the grid count as background.

use crate::features::NEIGHBORS_26;
use crate::volume::Mask;

pub const NEIGHBORS_6: [(i64, i64, i64); 6] = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)];

fn neighbor(m: &Mask, z: usize, y: usize, x: usize, d: (i64, i64, i64)) -> Option<usize> {
    let dims = m.dims();
    let (zz, yy, xx) = (z as i64 + d.0, y as i64 + d.1, x as i64 + d.2);
    if zz < 0 || yy < 0 || xx < 0 || zz >= dims.nz as i64 || yy >= dims.ny as i64 || xx >= dims.nx as i64 {
        return None;
    }
    Some(dims.index(zz as usize, yy as usize, xx as usize))
}

fn dilate_with(m: &Mask, offsets: &[(i64, i64, i64)]) -> Mask {
    let dims = m.dims();
    let mut out = m.clone();
    for (idx, &on) in m.data().iter().enumerate() {
        if !on {
            continue;
        }
        let (z, y, x) = dims.coords(idx);
        for &d in offsets {
            if let Some(n) = neighbor(m, z, y, x, d) {
                out.data_mut()[n] = true;
            }
        }
    }
    out
}

/// One dilation step with the 6-connected cross.
pub fn dilate6(m: &Mask) -> Mask {
    dilate_with(m, &NEIGHBORS_6)
}

/// One dilation step with the full 3×3×3 cube.
pub fn dilate26(m: &Mask) -> Mask {
    dilate_with(m, &NEIGHBORS_26)
}

/// One erosion step with the 6-connected cross.
pub fn erode6(m: &Mask) -> Mask {
    let dims = m.dims();
    let mut out = m.clone();
    for (idx, &on) in m.data().iter().enumerate() {
        if !on {
            continue;
        }
        let (z, y, x) = dims.coords(idx);
        let keep = NEIGHBORS_6
            .iter()
            .all(|&d| neighbor(m, z, y, x, d).is_some_and(|n| m.data()[n]));
        out.data_mut()[idx] = keep;
    }
    out
}

/// Translation by `(dz, dy, dx)` voxels; voxels leaving the grid are lost.
pub fn translate(m: &Mask, d: (i64, i64, i64)) -> Mask {
    let dims = m.dims();
    let mut out = Mask::empty(dims, m.spacing()).expect("dims already validated");
    for (idx, &on) in m.data().iter().enumerate() {
        if on {
            let (z, y, x) = dims.coords(idx);
            if let Some(n) = neighbor(m, z, y, x, d) {
                out.data_mut()[n] = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, Spacing};

    fn single(d: Dims, at: (usize, usize, usize)) -> Mask {
        Mask::from_voxels(d, Spacing::default(), &[at]).unwrap()
    }

    #[test]
    fn cross_and_cube() {
        let d = Dims::new(5, 5, 5);
        let m = single(d, (2, 2, 2));
        assert_eq!(dilate6(&m).count(), 7);
        assert_eq!(dilate26(&m).count(), 27);
        assert_eq!(erode6(&dilate6(&m)), m);
        assert_eq!(erode6(&m).count(), 0);
        // clipped at the corner
        assert_eq!(dilate6(&single(d, (0, 0, 0))).count(), 4);
    }

    #[test]
    fn erosion_treats_outside_as_background() {
        let d = Dims::new(3, 3, 3);
        let full = Mask::new(d, Spacing::default(), vec![true; 27]).unwrap();
        assert_eq!(erode6(&full), single(d, (1, 1, 1)));
    }

    #[test]
    fn translation() {
        let d = Dims::new(3, 4, 4);
        let m = Mask::from_voxels(d, Spacing::default(), &[(1, 1, 1), (1, 1, 3)]).unwrap();
        let t = translate(&m, (0, 2, 0));
        assert_eq!(t, Mask::from_voxels(d, Spacing::default(), &[(1, 3, 1), (1, 3, 3)]).unwrap());
        assert_eq!(translate(&m, (0, 0, 1)).count(), 1);
        assert_eq!(translate(&m, (0, 0, 0)), m);
    }
}
