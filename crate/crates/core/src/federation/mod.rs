//! Privacy-preserving site reports and their fleet-wide aggregation.
//!
//! A site turns one window of quality predictions into a [`SiteReport`]
//! holding only counts and per-feature summary statistics. The monitor
//! folds reports into a [`FleetSummary`] and checks it against
//! [`AlertRule`]s. Transport lives in the `segqc-federation` crate.

mod alerts;
mod report;
mod summary;

use thiserror::Error;

pub use alerts::{evaluate_alerts, Alert, AlertKind, AlertRule};
pub use report::{FeatureAggregate, FeatureAggregates, SiteAggregator, SiteReport};
pub use summary::{merge_report, FleetSummary, MergeOutcome, SiteSummary, WindowStats};

/// Version of the report, summary and alert payloads.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum FederationError {
    #[error("empty window")]
    EmptyWindow,
    #[error("misaligned inputs: {preds} predictions, {feats} feature rows, {ids} ids")]
    LengthMismatch { preds: usize, feats: usize, ids: usize },
    #[error("prediction {index} is for case {found:?}, expected {expected:?}")]
    CaseMismatch { index: usize, expected: String, found: String },
    #[error("non-finite feature value for case {0:?}")]
    NonFinite(String),
    #[error("stale window: site {site_id:?} window {window_id} is not after {last_window_id}")]
    StaleWindow { site_id: String, window_id: u64, last_window_id: u64 },
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("invalid alert rule: {0}")]
    InvalidRule(String),
}
