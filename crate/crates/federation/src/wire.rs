//! Response bodies and endpoint paths.

use serde::{Deserialize, Serialize};

use segqc_core::federation::{Alert, REPORT_FORMAT_VERSION};

pub const REPORTS_PATH: &str = "/v1/reports";
pub const SUMMARY_PATH: &str = "/v1/summary";
pub const ALERTS_PATH: &str = "/v1/alerts";
pub const HEALTH_PATH: &str = "/v1/healthz";

/// Reply to an accepted report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ack {
    pub format_version: u32,
    pub site_id: String,
    pub window_id: u64,
    pub model_version_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub format_version: u32,
    pub error: String,
}

impl ErrorBody {
    pub fn new(error: impl Into<String>) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            error: error.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertsBody {
    pub format_version: u32,
    pub alerts: Vec<Alert>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Health {
    pub format_version: u32,
    pub status: String,
    pub sites: usize,
    pub windows_ingested: u64,
}
