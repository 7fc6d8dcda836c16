//! Slow, direct reference implementations used to check the fast code.
#![allow(dead_code)]

use segqc_core::features::N_FEATURES;
use segqc_core::{Dims, Mask, Volume};

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Component labels from pairwise adjacency over all foreground voxels.
/// Labels are 1-based in order of each component's first voxel; 0 is
/// background.
pub fn components_all_pairs(m: &Mask) -> Vec<u32> {
    let d = m.dims();
    let fg: Vec<usize> = (0..d.len()).filter(|&i| m.data()[i]).collect();
    let mut uf = UnionFind::new(fg.len());
    for a in 0..fg.len() {
        let (za, ya, xa) = d.coords(fg[a]);
        for b in a + 1..fg.len() {
            let (zb, yb, xb) = d.coords(fg[b]);
            if za.abs_diff(zb) <= 1 && ya.abs_diff(yb) <= 1 && xa.abs_diff(xb) <= 1 {
                uf.union(a, b);
            }
        }
    }
    let mut out = vec![0u32; d.len()];
    let mut ids = std::collections::HashMap::new();
    for (k, &v) in fg.iter().enumerate() {
        let root = uf.find(k);
        let next = ids.len() as u32 + 1;
        out[v] = *ids.entry(root).or_insert(next);
    }
    out
}

/// Relabels by first appearance so two labelings compare as partitions.
pub fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == 0 {
                0
            } else {
                let next = map.len() as u32 + 1;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

fn count_components(labels: &[u32]) -> usize {
    labels.iter().copied().max().unwrap_or(0) as usize
}

/// Mean image value over the largest component (first in scan order on ties).
pub fn intensity_mode_direct(img: &Volume, m: &Mask) -> Option<f64> {
    let labels = components_all_pairs(m);
    let k = count_components(&labels);
    let mut best = None;
    let mut best_size = 0;
    for id in 1..=k as u32 {
        let size = labels.iter().filter(|&&l| l == id).count();
        if size > best_size {
            best = Some(id);
            best_size = size;
        }
    }
    let id = best?;
    let vals: Vec<f64> = labels
        .iter()
        .zip(img.data())
        .filter(|(&l, _)| l == id)
        .map(|(_, &v)| v as f64)
        .collect();
    Some(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// For each component, the mean Dice of its cross-sections on consecutive
/// slices where both are non-empty and they differ; 1.0 when there is no
/// such pair. Averaged over components, 1.0 for an empty mask.
pub fn smoothness_direct(m: &Mask) -> f64 {
    let d = m.dims();
    let labels = components_all_pairs(m);
    let k = count_components(&labels);
    if k == 0 {
        return 1.0;
    }
    let section = |id: u32, z: usize| -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for y in 0..d.ny {
            for x in 0..d.nx {
                if labels[d.index(z, y, x)] == id {
                    v.push((y, x));
                }
            }
        }
        v
    };
    let mut total = 0.0;
    for id in 1..=k as u32 {
        let mut scores = Vec::new();
        for z in 0..d.nz.saturating_sub(1) {
            let a = section(id, z);
            let b = section(id, z + 1);
            if a.is_empty() || b.is_empty() || a == b {
                continue;
            }
            let inter = a.iter().filter(|p| b.contains(p)).count();
            scores.push(2.0 * inter as f64 / (a.len() + b.len()) as f64);
        }
        total += if scores.is_empty() {
            1.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        };
    }
    total / k as f64
}

fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    (i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5
}

/// Tent-kernel weights of every input index for one output coordinate,
/// with the coordinate clamped into the input range.
fn tent_weights(i: usize, n_in: usize, n_out: usize) -> Vec<f64> {
    let c = source_coord(i, n_in, n_out).clamp(0.0, (n_in - 1) as f64);
    (0..n_in).map(|k| (1.0 - (c - k as f64).abs()).max(0.0)).collect()
}

/// Index of the input voxel centre nearest the output centre; halfway
/// cases go to the upper voxel.
fn nearest_index(i: usize, n_in: usize, n_out: usize) -> usize {
    let c = source_coord(i, n_in, n_out);
    let mut best = 0;
    for k in 0..n_in {
        let dk = (k as f64 - c).abs();
        let db = (best as f64 - c).abs();
        if dk < db - 1e-12 || (dk - db).abs() <= 1e-12 && k > best {
            best = k;
        }
    }
    best
}

/// Trilinear resampling as a full separable sum over all input voxels.
pub fn resample_volume_direct(v: &Volume, t: Dims) -> Vec<f64> {
    let s = v.dims();
    let mut out = Vec::with_capacity(t.len());
    for z in 0..t.nz {
        let wz = tent_weights(z, s.nz, t.nz);
        for y in 0..t.ny {
            let wy = tent_weights(y, s.ny, t.ny);
            for x in 0..t.nx {
                let wx = tent_weights(x, s.nx, t.nx);
                let mut acc = 0.0;
                for (kz, &a) in wz.iter().enumerate() {
                    for (ky, &b) in wy.iter().enumerate() {
                        for (kx, &c) in wx.iter().enumerate() {
                            acc += a * b * c * v.get(kz, ky, kx) as f64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn resample_mask_direct(m: &Mask, t: Dims) -> Vec<bool> {
    let s = m.dims();
    let mut out = Vec::with_capacity(t.len());
    for z in 0..t.nz {
        for y in 0..t.ny {
            for x in 0..t.nx {
                out.push(m.get(
                    nearest_index(z, s.nz, t.nz),
                    nearest_index(y, s.ny, t.ny),
                    nearest_index(x, s.nx, t.nx),
                ));
            }
        }
    }
    out
}

/// Central finite-difference gradient.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Minimizes `Σ (y_i - b - w·z_i)² + l2 ‖w‖²` over standardized rows by
/// gradient descent with a fixed step below `1 / L`. Returns `(w, b)`.
pub fn ridge_descent(z: &[[f64; N_FEATURES]], y: &[f64], l2: f64) -> ([f64; N_FEATURES], f64) {
    let n = z.len() as f64;
    // Lipschitz bound of the gradient: 2 (trace(ZᵀZ) + n + l2)
    let trace: f64 = z.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
    let step = 1.0 / (2.0 * (trace + n + l2));
    let mut w = [0.0; N_FEATURES];
    let mut b = 0.0;
    for _ in 0..2_000_000 {
        let mut gw = [0.0; N_FEATURES];
        let mut gb = 0.0;
        for (r, &yi) in z.iter().zip(y) {
            let e = b + (0..N_FEATURES).map(|j| w[j] * r[j]).sum::<f64>() - yi;
            gb += 2.0 * e;
            for j in 0..N_FEATURES {
                gw[j] += 2.0 * e * r[j];
            }
        }
        for j in 0..N_FEATURES {
            gw[j] += 2.0 * l2 * w[j];
        }
        let norm = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if norm.sqrt() < 1e-11 {
            break;
        }
        for j in 0..N_FEATURES {
            w[j] -= step * gw[j];
        }
        b -= step * gb;
    }
    (w, b)
}

/// Population mean and standard deviation per column.
pub fn standardize(rows: &[[f64; N_FEATURES]]) -> Vec<[f64; N_FEATURES]> {
    let n = rows.len() as f64;
    let mean: [f64; N_FEATURES] = std::array::from_fn(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n);
    let sd: [f64; N_FEATURES] = std::array::from_fn(|j| {
        (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt()
    });
    rows.iter()
        .map(|r| std::array::from_fn(|j| (r[j] - mean[j]) / sd[j]))
        .collect()
}
