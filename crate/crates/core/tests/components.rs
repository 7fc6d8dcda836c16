mod oracles;

use proptest::prelude::*;
use segqc_core::features::label_components;
use segqc_core::{Dims, Mask, Spacing};

use oracles::{canonical, components_all_pairs};

fn mask_strategy(max: usize) -> impl Strategy<Value = Mask> {
    (1..=max, 1..=max, 1..=max, 0.05f64..0.6).prop_flat_map(|(nz, ny, nx, p)| {
        prop::collection::vec(prop::bool::weighted(p), nz * ny * nx)
            .prop_map(move |data| Mask::new(Dims::new(nz, ny, nx), Spacing::default(), data).unwrap())
    })
}

fn flipped(m: &Mask, axis: usize) -> Mask {
    let d = m.dims();
    let mut out = Mask::empty(d, m.spacing()).unwrap();
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let (zz, yy, xx) = match axis {
                    0 => (d.nz - 1 - z, y, x),
                    1 => (z, d.ny - 1 - y, x),
                    _ => (z, y, d.nx - 1 - x),
                };
                out.set(zz, yy, xx, m.get(z, y, x));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_matches_union_find(m in mask_strategy(8)) {
        let fast = label_components(&m);
        let slow = components_all_pairs(&m);
        prop_assert_eq!(fast.labels(), &slow[..]);
        prop_assert_eq!(canonical(fast.labels()), canonical(&slow));
    }

    #[test]
    fn ids_contiguous_and_sizes_sum(m in mask_strategy(8)) {
        let c = label_components(&m);
        prop_assert_eq!(c.sizes().iter().sum::<usize>(), m.count());
        prop_assert!(c.sizes().iter().all(|&s| s > 0));
        let max = c.labels().iter().copied().max().unwrap_or(0) as usize;
        prop_assert_eq!(max, c.count());
        prop_assert_eq!(c.count() == 0, m.is_empty());
    }

    #[test]
    fn count_invariant_under_axis_flips(m in mask_strategy(7), axis in 0usize..3) {
        prop_assert_eq!(label_components(&flipped(&m, axis)).count(), label_components(&m).count());
    }

    #[test]
    fn bridging_never_increases_count(m in mask_strategy(7), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let d = m.dims();
        let fg: Vec<usize> = (0..d.len()).filter(|&i| m.data()[i]).collect();
        prop_assume!(!fg.is_empty());
        let (za, ya, xa) = d.coords(fg[a.index(fg.len())]);
        let (zb, yb, xb) = d.coords(fg[b.index(fg.len())]);
        let before = label_components(&m).count();
        let mut bridged = m.clone();
        bridged.set(za, ya, xa, true);
        // axis-by-axis walk, each step a 6-neighbour move
        let (mut z, mut y, mut x) = (za, ya, xa);
        while (z, y, x) != (zb, yb, xb) {
            if z != zb { z = if z < zb { z + 1 } else { z - 1 }; }
            else if y != yb { y = if y < yb { y + 1 } else { y - 1 }; }
            else { x = if x < xb { x + 1 } else { x - 1 }; }
            bridged.set(z, y, x, true);
        }
        let after = label_components(&bridged).count();
        prop_assert!(after <= before);
    }
}

#[test]
fn diagonal_corner_contact_is_connected() {
    let m = Mask::from_voxels(Dims::new(2, 2, 2), Spacing::default(), &[(0, 0, 0), (1, 1, 1)]).unwrap();
    assert_eq!(label_components(&m).count(), 1);
    let m = Mask::from_voxels(Dims::new(3, 1, 1), Spacing::default(), &[(0, 0, 0), (2, 0, 0)]).unwrap();
    assert_eq!(label_components(&m).count(), 2);
}
