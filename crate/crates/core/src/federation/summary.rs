use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::features::FeatureName;
use crate::federation::report::{FeatureAggregates, SiteReport};
use crate::federation::{FederationError, REPORT_FORMAT_VERSION};
use crate::models::N_BINS;

/// Per-window figures kept for rule evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub window_id: u64,
    pub n_cases: u64,
    pub failed_count: u64,
    pub features: FeatureAggregates,
    pub created_at: DateTime<Utc>,
}

impl From<&SiteReport> for WindowStats {
    fn from(r: &SiteReport) -> Self {
        Self {
            window_id: r.window_id,
            n_cases: r.n_cases,
            failed_count: r.failed_count,
            features: r.features,
            created_at: r.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub latest: SiteReport,
    pub windows_ingested: u64,
    pub cumulative_histogram: [u64; N_BINS],
    pub n_cases: u64,
    pub failed_count: u64,
    pub failed_rate: f64,
    /// Count-weighted pool over all windows.
    pub cumulative_features: FeatureAggregates,
    /// Pool over the first `baseline_windows` windows of the site.
    pub baseline_features: FeatureAggregates,
    pub baseline_cases: u64,
    pub history: Vec<WindowStats>,
    /// Ingested windows whose model version differed from the expected one.
    pub model_version_mismatches: Vec<u64>,
}

impl SiteSummary {
    pub fn last_window_id(&self) -> u64 {
        self.latest.window_id
    }

    /// Windows after the baseline period.
    pub fn post_baseline(&self, baseline_windows: usize) -> &[WindowStats] {
        &self.history[baseline_windows.min(self.history.len())..]
    }
}

/// Fleet-wide state of the monitor. Sites are kept in id order and fleet
/// totals are integers, so the result does not depend on the order in
/// which different sites' reports arrive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub format_version: u32,
    pub expected_model_version: Option<String>,
    pub baseline_windows: usize,
    pub sites: BTreeMap<String, SiteSummary>,
    pub total_cases: u64,
    pub total_failed: u64,
    /// `total_failed / total_cases`; `None` before the first report.
    pub failed_rate: Option<f64>,
    pub windows_ingested: u64,
}

/// Result of an accepted merge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub site_id: String,
    pub window_id: u64,
    /// Set when the report's model version differs from the expected one.
    pub model_version_flagged: bool,
}

impl Default for FleetSummary {
    fn default() -> Self {
        Self::new(None, 1)
    }
}

impl FleetSummary {
    pub fn new(expected_model_version: Option<String>, baseline_windows: usize) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            expected_model_version,
            baseline_windows: baseline_windows.max(1),
            sites: BTreeMap::new(),
            total_cases: 0,
            total_failed: 0,
            failed_rate: None,
            windows_ingested: 0,
        }
    }

    pub fn last_window_id(&self, site_id: &str) -> Option<u64> {
        self.sites.get(site_id).map(SiteSummary::last_window_id)
    }

    /// Checks that `r` would be accepted without changing anything.
    pub fn check(&self, r: &SiteReport) -> Result<(), FederationError> {
        r.validate()?;
        if let Some(last) = self.last_window_id(&r.site_id) {
            if r.window_id <= last {
                return Err(FederationError::StaleWindow {
                    site_id: r.site_id.clone(),
                    window_id: r.window_id,
                    last_window_id: last,
                });
            }
        }
        Ok(())
    }

    /// Folds `r` into the summary. A rejected report leaves it untouched.
    pub fn merge(&mut self, r: SiteReport) -> Result<MergeOutcome, FederationError> {
        self.check(&r)?;
        let flagged = self
            .expected_model_version
            .as_ref()
            .is_some_and(|v| *v != r.model_version);
        let baseline_windows = self.baseline_windows as u64;
        let stats = WindowStats::from(&r);
        let site = match self.sites.get_mut(&r.site_id) {
            Some(s) => {
                s.cumulative_features = s.cumulative_features.pool(s.n_cases, &r.features, r.n_cases);
                if s.windows_ingested < baseline_windows {
                    s.baseline_features = s.baseline_features.pool(s.baseline_cases, &r.features, r.n_cases);
                    s.baseline_cases += r.n_cases;
                }
                for (c, h) in s.cumulative_histogram.iter_mut().zip(&r.bin_histogram) {
                    *c += h;
                }
                s.n_cases += r.n_cases;
                s.failed_count += r.failed_count;
                s.windows_ingested += 1;
                s.history.push(stats);
                s.latest = r.clone();
                s
            }
            None => self.sites.entry(r.site_id.clone()).or_insert_with(|| SiteSummary {
                latest: r.clone(),
                windows_ingested: 1,
                cumulative_histogram: r.bin_histogram,
                n_cases: r.n_cases,
                failed_count: r.failed_count,
                failed_rate: 0.0,
                cumulative_features: r.features,
                baseline_features: r.features,
                baseline_cases: r.n_cases,
                history: vec![stats],
                model_version_mismatches: Vec::new(),
            }),
        };
        site.failed_rate = site.failed_count as f64 / site.n_cases as f64;
        if flagged {
            site.model_version_mismatches.push(r.window_id);
        }
        self.total_cases += r.n_cases;
        self.total_failed += r.failed_count;
        self.windows_ingested += 1;
        self.failed_rate = Some(self.total_failed as f64 / self.total_cases as f64);
        Ok(MergeOutcome {
            site_id: r.site_id,
            window_id: r.window_id,
            model_version_flagged: flagged,
        })
    }

    pub fn cumulative_histogram(&self) -> [u64; N_BINS] {
        let mut h = [0; N_BINS];
        for s in self.sites.values() {
            for (a, b) in h.iter_mut().zip(&s.cumulative_histogram) {
                *a += b;
            }
        }
        h
    }

    /// Plain-text overview for operators.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let rate = self.failed_rate.map_or("n/a".to_string(), |r| format!("{r:.3}"));
        let _ = writeln!(
            out,
            "fleet: {} site(s), {} window(s), {} case(s), failed rate {rate}",
            self.sites.len(),
            self.windows_ingested,
            self.total_cases
        );
        let _ = writeln!(
            out,
            "{:<16}{:>8}{:>8}{:>8}{:>10}  {:<24}{:>12}",
            "site", "window", "cases", "failed", "rate", "histogram", "containment"
        );
        for (id, s) in &self.sites {
            let h = s
                .cumulative_histogram
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                "{:<16}{:>8}{:>8}{:>8}{:>10.3}  {:<24}{:>12.3}{}",
                id,
                s.last_window_id(),
                s.n_cases,
                s.failed_count,
                s.failed_rate,
                format!("[{h}]"),
                s.cumulative_features.get(FeatureName::LesionsWithinLungs).mean,
                if s.model_version_mismatches.is_empty() { "" } else { "  model version mismatch" }
            );
        }
        out
    }
}

/// Functional form of [`FleetSummary::merge`].
pub fn merge_report(summary: &FleetSummary, r: SiteReport) -> Result<FleetSummary, FederationError> {
    let mut next = summary.clone();
    next.merge(r)?;
    Ok(next)
}
