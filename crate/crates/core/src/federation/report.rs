use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::features::{FeatureName, FeatureVector, FEATURE_VERSION, N_FEATURES};
use crate::federation::{FederationError, REPORT_FORMAT_VERSION};
use crate::models::{QualityPrediction, N_BINS};

/// Summary statistics of one feature over a window; `std` is the
/// population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureAggregate {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl FeatureAggregate {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Pools two aggregates over `n` and `m` values.
    pub fn pool(&self, n: u64, other: &Self, m: u64) -> Self {
        if n == 0 {
            return *other;
        }
        if m == 0 {
            return *self;
        }
        let (nf, mf) = (n as f64, m as f64);
        let total = nf + mf;
        let mean = (nf * self.mean + mf * other.mean) / total;
        let ss = nf * (self.std.powi(2) + (self.mean - mean).powi(2))
            + mf * (other.std.powi(2) + (other.mean - mean).powi(2));
        Self {
            mean,
            std: (ss / total).max(0.0).sqrt(),
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    fn is_consistent(&self) -> bool {
        let finite = [self.mean, self.std, self.min, self.max].iter().all(|v| v.is_finite());
        finite && self.std >= 0.0 && self.min <= self.max
    }
}

/// One [`FeatureAggregate`] per feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureAggregates {
    pub connected_components: FeatureAggregate,
    pub intensity_mode: FeatureAggregate,
    pub smoothness: FeatureAggregate,
    pub lesions_within_lungs: FeatureAggregate,
}

impl FeatureAggregates {
    pub fn from_array(a: [FeatureAggregate; N_FEATURES]) -> Self {
        Self {
            connected_components: a[0],
            intensity_mode: a[1],
            smoothness: a[2],
            lesions_within_lungs: a[3],
        }
    }

    pub fn to_array(&self) -> [FeatureAggregate; N_FEATURES] {
        [
            self.connected_components,
            self.intensity_mode,
            self.smoothness,
            self.lesions_within_lungs,
        ]
    }

    pub fn get(&self, name: FeatureName) -> FeatureAggregate {
        self.to_array()[name.index()]
    }

    pub fn pool(&self, n: u64, other: &Self, m: u64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|k| a[k].pool(n, &b[k], m)))
    }
}

/// The only payload a site sends: counts and feature statistics for one
/// window. No field can carry case identifiers or per-case values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteReport {
    pub format_version: u32,
    pub site_id: String,
    pub window_id: u64,
    pub n_cases: u64,
    pub bin_histogram: [u64; N_BINS],
    pub failed_count: u64,
    pub features: FeatureAggregates,
    pub model_version: String,
    pub feature_version: u32,
    pub created_at: DateTime<Utc>,
}

impl SiteReport {
    /// Checks the internal invariants of a received report.
    pub fn validate(&self) -> Result<(), FederationError> {
        let bad = |m: String| Err(FederationError::InvalidReport(m));
        if self.format_version != REPORT_FORMAT_VERSION {
            return bad(format!(
                "format_version {} (expected {REPORT_FORMAT_VERSION})",
                self.format_version
            ));
        }
        if self.site_id.trim().is_empty() {
            return bad("empty site_id".into());
        }
        if self.window_id == 0 {
            return bad("window_id starts at 1".into());
        }
        if self.n_cases == 0 {
            return bad("n_cases is 0".into());
        }
        let total: u64 = self.bin_histogram.iter().sum();
        if total != self.n_cases {
            return bad(format!("histogram sums to {total}, n_cases is {}", self.n_cases));
        }
        let failed: u64 = self.bin_histogram[..3].iter().sum();
        if failed != self.failed_count {
            return bad(format!("failed_count {} but bins 0..=2 hold {failed}", self.failed_count));
        }
        if let Some(name) = FeatureName::ALL
            .iter()
            .find(|&&n| !self.features.get(n).is_consistent())
        {
            return bad(format!("inconsistent aggregate for {name}"));
        }
        Ok(())
    }

    pub fn failed_rate(&self) -> f64 {
        self.failed_count as f64 / self.n_cases as f64
    }
}

/// Produces consecutive reports for one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteAggregator {
    site_id: String,
    model_version: String,
    last_window_id: u64,
}

impl SiteAggregator {
    pub fn new(site_id: impl Into<String>, model_version: impl Into<String>) -> Self {
        Self {
            site_id: site_id.into(),
            model_version: model_version.into(),
            last_window_id: 0,
        }
    }

    /// Continues numbering after `window_id`, e.g. after a restart.
    pub fn resume_after(mut self, window_id: u64) -> Self {
        self.last_window_id = window_id;
        self
    }

    pub fn site_id(&self) -> &str {
        &self.site_id
    }

    pub fn last_window_id(&self) -> u64 {
        self.last_window_id
    }

    /// Aggregates one window. `preds`, `feats` and `ids` are aligned by
    /// index. On error no window id is consumed.
    pub fn aggregate(
        &mut self,
        preds: &[QualityPrediction],
        feats: &[FeatureVector],
        ids: &[String],
        created_at: DateTime<Utc>,
    ) -> Result<SiteReport, FederationError> {
        if preds.len() != feats.len() || preds.len() != ids.len() {
            return Err(FederationError::LengthMismatch {
                preds: preds.len(),
                feats: feats.len(),
                ids: ids.len(),
            });
        }
        if preds.is_empty() {
            return Err(FederationError::EmptyWindow);
        }
        for (index, (p, id)) in preds.iter().zip(ids).enumerate() {
            if &p.case_id != id {
                return Err(FederationError::CaseMismatch {
                    index,
                    expected: id.clone(),
                    found: p.case_id.clone(),
                });
            }
        }
        if let Some((_, id)) = feats.iter().zip(ids).find(|(f, _)| !f.is_finite()) {
            return Err(FederationError::NonFinite(id.clone()));
        }

        let mut bin_histogram = [0u64; N_BINS];
        for p in preds {
            bin_histogram[p.predicted_bin.index()] += 1;
        }
        let rows: Vec<[f64; N_FEATURES]> = feats.iter().map(FeatureVector::to_array).collect();
        let features = FeatureAggregates::from_array(std::array::from_fn(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            FeatureAggregate::from_values(&col).expect("non-empty window")
        }));
        self.last_window_id += 1;
        Ok(SiteReport {
            format_version: REPORT_FORMAT_VERSION,
            site_id: self.site_id.clone(),
            window_id: self.last_window_id,
            n_cases: preds.len() as u64,
            failed_count: bin_histogram[..3].iter().sum(),
            bin_histogram,
            features,
            model_version: self.model_version.clone(),
            feature_version: FEATURE_VERSION,
            created_at,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QualityBin;

    fn pred(id: &str, bin: u8) -> QualityPrediction {
        let b = QualityBin::new(bin).unwrap();
        QualityPrediction {
            case_id: id.into(),
            predicted_bin: b,
            predicted_dice: b.midpoint(),
            failed: b.is_failed(),
        }
    }

    fn feats(n: usize) -> Vec<FeatureVector> {
        (0..n)
            .map(|i| FeatureVector {
                connected_components: i as u32 + 1,
                intensity_mode: -600.0 + 10.0 * i as f64,
                smoothness: 0.5 + 0.1 * i as f64,
                lesions_within_lungs: 1.0 - 0.05 * i as f64,
            })
            .collect()
    }

    fn window(bins: &[u8]) -> (Vec<QualityPrediction>, Vec<FeatureVector>, Vec<String>) {
        let ids: Vec<String> = (0..bins.len()).map(|i| format!("c{i}")).collect();
        let preds = bins.iter().zip(&ids).map(|(&b, id)| pred(id, b)).collect();
        (preds, feats(bins.len()), ids)
    }

    #[test]
    fn histogram_and_failed_count() {
        let mut agg = SiteAggregator::new("s", "m1");
        let (p, f, ids) = window(&[4, 4, 2]);
        let r = agg.aggregate(&p, &f, &ids, Utc::now()).unwrap();
        assert_eq!(r.bin_histogram, [0, 0, 1, 0, 2]);
        assert_eq!(r.failed_count, 1);
        assert_eq!(r.window_id, 1);
        r.validate().unwrap();

        let (p, f, ids) = window(&[4, 4, 4, 4]);
        let r = agg.aggregate(&p, &f, &ids, Utc::now()).unwrap();
        assert_eq!(r.failed_count, 0);
        assert_eq!(r.window_id, 2);
    }

    #[test]
    fn empty_and_misaligned_windows_emit_nothing() {
        let mut agg = SiteAggregator::new("s", "m1");
        assert_eq!(agg.aggregate(&[], &[], &[], Utc::now()), Err(FederationError::EmptyWindow));
        let (p, f, ids) = window(&[1, 2]);
        assert!(matches!(
            agg.aggregate(&p, &f[..1], &ids, Utc::now()),
            Err(FederationError::LengthMismatch { .. })
        ));
        let swapped = vec![ids[1].clone(), ids[0].clone()];
        assert!(matches!(
            agg.aggregate(&p, &f, &swapped, Utc::now()),
            Err(FederationError::CaseMismatch { index: 0, .. })
        ));
        assert_eq!(agg.last_window_id(), 0);
    }

    #[test]
    fn pooled_mean_is_count_weighted() {
        let a = FeatureAggregate { mean: 1.0, std: 0.0, min: 1.0, max: 1.0 };
        let b = FeatureAggregate { mean: 4.0, std: 0.0, min: 4.0, max: 4.0 };
        let p = a.pool(10, &b, 30);
        assert_eq!(p.mean, 3.25);
        assert_eq!((p.min, p.max), (1.0, 4.0));
        // std of ten 1s and thirty 4s
        assert!((p.std - (0.75f64 * 0.25).sqrt() * 3.0).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_broken_invariants() {
        let mut agg = SiteAggregator::new("s", "m1");
        let (p, f, ids) = window(&[0, 3, 4]);
        let good = agg.aggregate(&p, &f, &ids, Utc::now()).unwrap();
        let mut r = good.clone();
        r.n_cases = 4;
        assert!(r.validate().is_err());
        let mut r = good.clone();
        r.failed_count = 0;
        assert!(r.validate().is_err());
        let mut r = good.clone();
        r.format_version = 99;
        assert!(r.validate().is_err());
        let mut r = good;
        r.features.smoothness.std = -1.0;
        assert!(r.validate().is_err());
    }
}
