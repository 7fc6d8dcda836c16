use std::collections::BTreeSet;

use chrono::DateTime;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segqc_core::federation::{FleetSummary, SiteAggregator, SiteReport, REPORT_FORMAT_VERSION};
use segqc_core::models::{QualityBin, QualityPrediction};
use segqc_core::FeatureVector;
use serde_json::Value;

fn window(rng: &mut ChaCha8Rng, start: usize, n: usize) -> (Vec<QualityPrediction>, Vec<FeatureVector>, Vec<String>) {
    let mut preds = Vec::new();
    let mut feats = Vec::new();
    let mut ids = Vec::new();
    for i in start..start + n {
        let bin = QualityBin::ALL[rng.random_range(0..5)];
        let id = format!("case{i}");
        preds.push(QualityPrediction {
            case_id: id.clone(),
            predicted_bin: bin,
            predicted_dice: bin.midpoint(),
            failed: bin.is_failed(),
        });
        feats.push(FeatureVector {
            connected_components: rng.random_range(0..20),
            intensity_mode: rng.random_range(-900.0..0.0),
            smoothness: rng.random_range(0.0..1.0),
            lesions_within_lungs: rng.random_range(0.0..1.0),
        });
        ids.push(id);
    }
    (preds, feats, ids)
}

/// Per-site report sequences with window ids 1, 2, ...
fn fleet(seed: u64, sites: usize, windows: usize) -> Vec<Vec<SiteReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sites)
        .map(|s| {
            let mut agg = SiteAggregator::new(format!("site-{s}"), "lr-00000000");
            (0..windows)
                .map(|w| {
                    let n = rng.random_range(1..12);
                    let (p, f, ids) = window(&mut rng, w * 100, n);
                    let t = DateTime::from_timestamp(1_760_000_000 + (s * 100 + w) as i64, 0).unwrap();
                    agg.aggregate(&p, &f, &ids, t).unwrap()
                })
                .collect()
        })
        .collect()
}

/// Random interleaving that keeps each site's own order.
fn interleave(per_site: &[Vec<SiteReport>], seed: u64) -> Vec<SiteReport> {
    let mut tags: Vec<usize> = per_site.iter().enumerate().flat_map(|(s, r)| vec![s; r.len()]).collect();
    tags.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut next = vec![0; per_site.len()];
    tags.into_iter()
        .map(|s| {
            next[s] += 1;
            per_site[s][next[s] - 1].clone()
        })
        .collect()
}

fn fold(reports: &[SiteReport]) -> FleetSummary {
    let mut s = FleetSummary::new(Some("lr-00000000".into()), 2);
    for r in reports {
        s.merge(r.clone()).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arrival_order_across_sites_does_not_matter(seed in any::<u64>(), sites in 1usize..5, windows in 1usize..5, a in any::<u64>(), b in any::<u64>()) {
        let per_site = fleet(seed, sites, windows);
        let x = fold(&interleave(&per_site, a));
        let y = fold(&interleave(&per_site, b));
        prop_assert_eq!(&x, &y);
        prop_assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());

        let all: Vec<&SiteReport> = per_site.iter().flatten().collect();
        let cases: u64 = all.iter().map(|r| r.n_cases).sum();
        let failed: u64 = all.iter().map(|r| r.failed_count).sum();
        prop_assert_eq!(x.total_cases, cases);
        prop_assert_eq!(x.total_failed, failed);
        prop_assert_eq!(x.failed_rate, Some(failed as f64 / cases as f64));
        let mut hist = [0u64; 5];
        for r in &all {
            for k in 0..5 { hist[k] += r.bin_histogram[k]; }
        }
        prop_assert_eq!(x.cumulative_histogram(), hist);
    }

    #[test]
    fn replaying_any_report_changes_nothing(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let per_site = fleet(seed, 3, 3);
        let reports = interleave(&per_site, seed);
        let s = fold(&reports);
        let mut t = s.clone();
        let r = pick.get(&reports).clone();
        prop_assert!(t.merge(r).is_err());
        prop_assert_eq!(t, s);
    }
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn report_schema_is_a_closed_set_of_aggregates() {
    let r = fleet(1, 1, 1).remove(0).remove(0);
    let v = serde_json::to_value(&r).unwrap();
    let top: BTreeSet<String> = [
        "format_version",
        "site_id",
        "window_id",
        "n_cases",
        "bin_histogram",
        "failed_count",
        "features",
        "model_version",
        "feature_version",
        "created_at",
    ]
    .map(String::from)
    .into();
    assert_eq!(keys(&v), top);
    let features: BTreeSet<String> = ["connected_components", "intensity_mode", "smoothness", "lesions_within_lungs"]
        .map(String::from)
        .into();
    assert_eq!(keys(&v["features"]), features);
    let stats: BTreeSet<String> = ["mean", "std", "min", "max"].map(String::from).into();
    for f in &features {
        assert_eq!(keys(&v["features"][f]), stats);
        for s in &stats {
            assert!(v["features"][f][s].is_number());
        }
    }
    assert_eq!(v["bin_histogram"].as_array().unwrap().len(), 5);
    assert_eq!(v["format_version"], REPORT_FORMAT_VERSION);
    // no case id appears anywhere in the payload
    let text = serde_json::to_string(&r).unwrap();
    assert!((0..r.n_cases).all(|i| !text.contains(&format!("\"case{i}\""))));

    for (path, extra) in [(vec![], "case_ids"), (vec!["features"], "values"), (vec!["features", "smoothness"], "per_case")] {
        let mut w = v.clone();
        let mut slot = &mut w;
        for p in &path {
            slot = &mut slot[*p];
        }
        slot.as_object_mut().unwrap().insert(extra.into(), serde_json::json!(["x"]));
        assert!(serde_json::from_value::<SiteReport>(w).is_err(), "{path:?}.{extra} accepted");
    }
}
