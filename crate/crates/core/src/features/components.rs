//! 3D connected-component labeling.
//!
//! Two foreground voxels are neighbours when every coordinate differs by at
//! most one (the 3x3x3 neighbourhood, 26-connectivity). Every such offset
//! has city-block length <= 3.

use std::collections::VecDeque;

use crate::volume::{Dims, Mask};

/// Label grid produced by [`label_components`]. Label 0 is background;
/// components are numbered `1..=count` in order of their first voxel in
/// z-major scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComponents {
    dims: Dims,
    labels: Vec<u32>,
    /// `sizes[id - 1]` is the voxel count of component `id`.
    sizes: Vec<usize>,
}

impl LabeledComponents {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size_of(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    /// Id of the largest component; ties go to the lowest id.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(u32, usize)> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((i as u32 + 1, s));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Component ids ordered by decreasing size, ties by increasing id.
    pub fn ids_by_size(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (1..=self.count() as u32).collect();
        ids.sort_by(|&a, &b| self.size_of(b).cmp(&self.size_of(a)).then(a.cmp(&b)));
        ids
    }

    /// Mask of the voxels carrying any of `ids`.
    pub fn select(&self, ids: &[u32], template: &Mask) -> Mask {
        let mut keep = vec![false; self.count() + 1];
        for &id in ids {
            keep[id as usize] = true;
        }
        let data = self.labels.iter().map(|&l| keep[l as usize]).collect();
        Mask::new(self.dims, template.spacing(), data).expect("label grid matches template dims")
    }
}

/// 26-neighbourhood offsets.
pub(crate) const NEIGHBORS_26: [(i64, i64, i64); 26] = {
    let mut out = [(0, 0, 0); 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dz == 0 && dy == 0 && dx == 0) {
                    out[n] = (dz, dy, dx);
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Labels the 26-connected components of `mask` by breadth-first flood fill.
pub fn label_components(mask: &Mask) -> LabeledComponents {
    let dims = mask.dims();
    let fg = mask.data();
    let mut labels = vec![0u32; dims.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    let (nz, ny, nx) = (dims.nz as i64, dims.ny as i64, dims.nx as i64);

    for start in 0..dims.len() {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let (z, y, x) = dims.coords(idx);
            for &(dz, dy, dx) in &NEIGHBORS_26 {
                let (zz, yy, xx) = (z as i64 + dz, y as i64 + dy, x as i64 + dx);
                if zz < 0 || yy < 0 || xx < 0 || zz >= nz || yy >= ny || xx >= nx {
                    continue;
                }
                let n = dims.index(zz as usize, yy as usize, xx as usize);
                if fg[n] && labels[n] == 0 {
                    labels[n] = id;
                    queue.push_back(n);
                }
            }
        }
        sizes.push(size);
    }

    LabeledComponents {
        dims,
        labels,
        sizes,
    }
}
