use std::fmt;

use serde::{Deserialize, Serialize};

use crate::features::FeatureName;
use crate::federation::report::FeatureAggregate;
use crate::federation::summary::{FleetSummary, SiteSummary, WindowStats};
use crate::federation::FederationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    /// Share of failed predictions over the recent windows.
    FailedRateThreshold,
    /// Distance of a recent feature mean from the site baseline, in
    /// standard errors.
    FeatureDrift,
}

impl fmt::Display for AlertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlertKind::FailedRateThreshold => "failed_rate_threshold",
            AlertKind::FeatureDrift => "feature_drift",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertRule {
    pub kind: AlertKind,
    pub threshold: f64,
    /// Minimum number of cases in the evaluated windows.
    pub min_cases: u64,
    /// Number of most recent windows the rule looks at.
    pub window_count: usize,
    /// Feature checked by a drift rule; all four when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureName>,
}

impl Default for AlertRule {
    fn default() -> Self {
        Self {
            kind: AlertKind::FailedRateThreshold,
            threshold: 0.2,
            min_cases: 20,
            window_count: 3,
            feature: None,
        }
    }
}

impl AlertRule {
    pub fn feature_drift(threshold: f64, min_cases: u64, window_count: usize, feature: Option<FeatureName>) -> Self {
        Self {
            kind: AlertKind::FeatureDrift,
            threshold,
            min_cases,
            window_count,
            feature,
        }
    }

    pub fn validate(&self) -> Result<(), FederationError> {
        let bad = |m: String| Err(FederationError::InvalidRule(m));
        match self.kind {
            AlertKind::FailedRateThreshold if !(self.threshold > 0.0 && self.threshold <= 1.0) => {
                return bad(format!("failed-rate threshold {} outside (0, 1]", self.threshold));
            }
            AlertKind::FeatureDrift if !(self.threshold > 0.0 && self.threshold.is_finite()) => {
                return bad(format!("drift threshold {} must be positive", self.threshold));
            }
            _ => {}
        }
        if self.min_cases < 1 {
            return bad("min_cases must be at least 1".into());
        }
        if self.window_count < 1 {
            return bad("window_count must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub site_id: String,
    /// Index of the rule in the evaluated rule list.
    pub rule: usize,
    pub kind: AlertKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureName>,
    /// Failed rate, or drift in standard errors.
    pub value: f64,
    pub threshold: f64,
    pub cases: u64,
    pub last_window_id: u64,
    pub message: String,
}

fn pooled(windows: &[WindowStats], pick: impl Fn(&WindowStats) -> FeatureAggregate) -> (FeatureAggregate, u64) {
    let mut it = windows.iter();
    let first = it.next().expect("at least one window");
    it.fold((pick(first), first.n_cases), |(acc, n), w| (acc.pool(n, &pick(w), w.n_cases), n + w.n_cases))
}

/// Two-sample standard-error distance between means; infinite when both
/// samples are constant but differ.
fn drift_distance(base: &FeatureAggregate, nb: u64, recent: &FeatureAggregate, nr: u64) -> f64 {
    let diff = (recent.mean - base.mean).abs();
    let se = (base.std.powi(2) / nb as f64 + recent.std.powi(2) / nr as f64).sqrt();
    if se > 0.0 {
        diff / se
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn site_alerts(id: &str, s: &SiteSummary, idx: usize, rule: &AlertRule, baseline_windows: usize, out: &mut Vec<Alert>) {
    let last_window_id = s.last_window_id();
    match rule.kind {
        AlertKind::FailedRateThreshold => {
            let recent = &s.history[s.history.len().saturating_sub(rule.window_count)..];
            let cases: u64 = recent.iter().map(|w| w.n_cases).sum();
            let failed: u64 = recent.iter().map(|w| w.failed_count).sum();
            if cases == 0 || cases < rule.min_cases {
                return;
            }
            let rate = failed as f64 / cases as f64;
            if rate > rule.threshold {
                out.push(Alert {
                    site_id: id.to_string(),
                    rule: idx,
                    kind: rule.kind,
                    feature: None,
                    value: rate,
                    threshold: rule.threshold,
                    cases,
                    last_window_id,
                    message: format!(
                        "site {id}: failed rate {rate:.3} over the last {} window(s) ({failed}/{cases}) exceeds {}",
                        recent.len(),
                        rule.threshold
                    ),
                });
            }
        }
        AlertKind::FeatureDrift => {
            let after = s.post_baseline(baseline_windows);
            let recent = &after[after.len().saturating_sub(rule.window_count)..];
            if recent.is_empty() || s.baseline_cases == 0 {
                return;
            }
            let cases: u64 = recent.iter().map(|w| w.n_cases).sum();
            if cases < rule.min_cases {
                return;
            }
            let names: Vec<FeatureName> = rule.feature.map_or_else(|| FeatureName::ALL.to_vec(), |f| vec![f]);
            for name in names {
                let base = s.baseline_features.get(name);
                let (cur, n) = pooled(recent, |w| w.features.get(name));
                let z = drift_distance(&base, s.baseline_cases, &cur, n);
                if z > rule.threshold {
                    out.push(Alert {
                        site_id: id.to_string(),
                        rule: idx,
                        kind: rule.kind,
                        feature: Some(name),
                        value: z,
                        threshold: rule.threshold,
                        cases,
                        last_window_id,
                        message: format!(
                            "site {id}: {name} mean {:.4} vs baseline {:.4} ({z:.1} standard errors > {})",
                            cur.mean, base.mean, rule.threshold
                        ),
                    });
                }
            }
        }
    }
}

/// Alerts raised by `rules`, ordered by site id then rule index.
pub fn evaluate_alerts(summary: &FleetSummary, rules: &[AlertRule]) -> Vec<Alert> {
    let mut out = Vec::new();
    for (id, s) in &summary.sites {
        for (idx, rule) in rules.iter().enumerate() {
            site_alerts(id, s, idx, rule, summary.baseline_windows, &mut out);
        }
    }
    out
}
