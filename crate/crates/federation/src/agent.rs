//! Site agent: watches an input directory, scores cases with a local
//! model, and pushes one aggregate report per full window.
//!
//! A case `<id>` is ready when `<id>_image.nii[.gz]` and
//! `<id>_pred.nii[.gz]` exist (plus `<id>_lung.nii[.gz]` in file lung
//! mode). Producers should move files into place atomically. Cases are
//! consumed in id order.
//!
//! All state (window counter, processed cases, undelivered reports) lives
//! in one JSON file that is replaced atomically after every change, so a
//! restart never reuses a window id and never loses a report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use segqc_core::federation::{FederationError, SiteAggregator, SiteReport, REPORT_FORMAT_VERSION};
use segqc_core::models::{ModelError, QualityPrediction, TrainedModel, N_BINS};
use segqc_core::{extract_case_files, FeatureVector, LungMode};

use crate::durable::write_atomic;
use crate::wire::REPORTS_PATH;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Attempts per report and flush before giving up until the next flush.
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            initial_backoff_ms: 200,
            max_backoff_ms: 10_000,
            max_attempts: 6,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry `attempt` (1-based): doubling from the initial
    /// backoff, capped at the maximum.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(32);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub site_id: String,
    /// Base URL, e.g. `http://127.0.0.1:8750`.
    pub monitor_url: String,
    pub model_path: PathBuf,
    pub input_dir: PathBuf,
    pub window_size: usize,
    #[serde(default)]
    pub lung_mode: LungMode,
    /// Defaults to `<input_dir>/.segqc-agent`.
    #[serde(default)]
    pub state_dir: Option<PathBuf>,
    /// Defaults to the model kind plus the CRC-32 of the model file.
    #[serde(default)]
    pub model_version: Option<String>,
    #[serde(default = "poll_interval_ms")]
    pub poll_interval_ms: u64,
    #[serde(default = "request_timeout_ms")]
    pub request_timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub auth_token: Option<String>,
}

fn format_version() -> u32 {
    REPORT_FORMAT_VERSION
}

fn poll_interval_ms() -> u64 {
    1000
}

fn request_timeout_ms() -> u64 {
    10_000
}

impl AgentConfig {
    pub fn new(
        site_id: impl Into<String>,
        monitor_url: impl Into<String>,
        model_path: impl Into<PathBuf>,
        input_dir: impl Into<PathBuf>,
        window_size: usize,
    ) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            site_id: site_id.into(),
            monitor_url: monitor_url.into(),
            model_path: model_path.into(),
            input_dir: input_dir.into(),
            window_size,
            lung_mode: LungMode::Heuristic,
            state_dir: None,
            model_version: None,
            poll_interval_ms: poll_interval_ms(),
            request_timeout_ms: request_timeout_ms(),
            retry: RetryPolicy::default(),
            auth_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::Config(m));
        if self.format_version != REPORT_FORMAT_VERSION {
            return bad(format!("format_version {}", self.format_version));
        }
        if self.site_id.trim().is_empty() {
            return bad("site_id is empty".into());
        }
        if self.window_size == 0 {
            return bad("window_size must be at least 1".into());
        }
        if !self.monitor_url.starts_with("http://") && !self.monitor_url.starts_with("https://") {
            return bad(format!("monitor_url {:?} is not an http(s) URL", self.monitor_url));
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be at least 1".into());
        }
        Ok(())
    }

    pub fn state_dir(&self) -> PathBuf {
        self.state_dir.clone().unwrap_or_else(|| self.input_dir.join(".segqc-agent"))
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("model {path}: {source}")]
    Model {
        path: String,
        #[source]
        source: ModelError,
    },
    #[error("agent state {path}: {message}")]
    State { path: String, message: String },
    #[error(transparent)]
    Report(#[from] FederationError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Histogram of an emitted window, kept for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowRecord {
    pub window_id: u64,
    pub n_cases: u64,
    pub bin_histogram: [u64; N_BINS],
}

/// Persistent agent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentState {
    pub format_version: u32,
    pub site_id: String,
    pub last_window_id: u64,
    /// Cases already counted in an emitted window.
    pub processed: BTreeSet<String>,
    /// Cases that could not be scored, with the reason.
    pub failed: BTreeMap<String, String>,
    /// Reports not yet acknowledged by the monitor, oldest first.
    pub outbox: Vec<SiteReport>,
    /// Reports the monitor refused as invalid, with its reply.
    pub rejected: Vec<(SiteReport, String)>,
    pub emitted: Vec<WindowRecord>,
}

impl AgentState {
    fn new(site_id: &str) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            site_id: site_id.to_string(),
            last_window_id: 0,
            processed: BTreeSet::new(),
            failed: BTreeMap::new(),
            outbox: Vec::new(),
            rejected: Vec::new(),
            emitted: Vec::new(),
        }
    }
}

pub const STATE_FILE: &str = "agent-state.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlushOutcome {
    pub delivered: usize,
    /// Already ingested by the monitor (409), e.g. after a lost reply.
    pub duplicates: usize,
    pub rejected: usize,
    pub pending: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOutcome {
    pub windows_emitted: usize,
    pub cases_failed: usize,
    pub flush: FlushOutcome,
}

enum Delivery {
    Accepted,
    Duplicate,
    Rejected(String),
    Unreachable(String),
}

pub struct Agent {
    cfg: AgentConfig,
    model: TrainedModel,
    model_version: String,
    state: AgentState,
    state_path: PathBuf,
    http: ureq::Agent,
}

impl Agent {
    pub fn open(cfg: AgentConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        let model_err = |source| AgentError::Model {
            path: cfg.model_path.display().to_string(),
            source,
        };
        let bytes = fs::read(&cfg.model_path).map_err(|e| model_err(ModelError::Io(e)))?;
        let model = TrainedModel::load(&bytes).map_err(model_err)?;
        let model_version = cfg.model_version.clone().unwrap_or_else(|| {
            format!(
                "{}-{:08x}",
                model.kind.short_name().to_ascii_lowercase(),
                crc32fast::hash(&bytes)
            )
        });
        let dir = cfg.state_dir();
        fs::create_dir_all(&dir)?;
        let state_path = dir.join(STATE_FILE);
        let state = match fs::read(&state_path) {
            Ok(b) => {
                let bad = |message: String| AgentError::State {
                    path: state_path.display().to_string(),
                    message,
                };
                let s: AgentState = serde_json::from_slice(&b).map_err(|e| bad(e.to_string()))?;
                if s.site_id != cfg.site_id {
                    return Err(bad(format!("belongs to site {:?}", s.site_id)));
                }
                s
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => AgentState::new(&cfg.site_id),
            Err(e) => return Err(e.into()),
        };
        let http = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(cfg.request_timeout_ms)))
            .build()
            .into();
        Ok(Self {
            cfg,
            model,
            model_version,
            state,
            state_path,
            http,
        })
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    fn save_state(&self) -> Result<(), AgentError> {
        let mut bytes = serde_json::to_vec_pretty(&self.state).expect("state serializes");
        bytes.push(b'\n');
        write_atomic(&self.state_path, &bytes)?;
        Ok(())
    }

    fn find(&self, id: &str, role: &str) -> Option<PathBuf> {
        ["nii.gz", "nii"]
            .iter()
            .map(|ext| self.cfg.input_dir.join(format!("{id}_{role}.{ext}")))
            .find(|p| p.is_file())
    }

    /// Ready cases not yet processed or failed, in id order.
    pub fn pending_cases(&self) -> Result<Vec<String>, AgentError> {
        let mut ids = BTreeSet::new();
        for entry in fs::read_dir(&self.cfg.input_dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            let id = name
                .strip_suffix("_pred.nii.gz")
                .or_else(|| name.strip_suffix("_pred.nii"));
            if let Some(id) = id {
                if !self.state.processed.contains(id) && !self.state.failed.contains_key(id) {
                    ids.insert(id.to_string());
                }
            }
        }
        Ok(ids
            .into_iter()
            .filter(|id| {
                self.find(id, "image").is_some()
                    && (self.cfg.lung_mode == LungMode::Heuristic || self.find(id, "lung").is_some())
            })
            .collect())
    }

    fn score(&self, id: &str) -> Result<(QualityPrediction, FeatureVector), String> {
        let image = self.find(id, "image").ok_or("image vanished")?;
        let pred = self.find(id, "pred").ok_or("prediction vanished")?;
        let lung = self.find(id, "lung");
        let f = extract_case_files(&image, &pred, self.cfg.lung_mode, lung.as_deref()).map_err(|e| e.to_string())?;
        let p = self.model.predict(&f).map_err(|e| e.to_string())?;
        Ok((p.for_case(id), f))
    }

    /// Scores pending cases and emits a report for every full window. The
    /// cases of an incomplete window are left pending.
    pub fn process_pending(&mut self) -> Result<(usize, usize), AgentError> {
        let mut windows = 0;
        let mut failures = 0;
        let (mut preds, mut feats, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for id in self.pending_cases()? {
            match self.score(&id) {
                Ok((p, f)) => {
                    preds.push(p);
                    feats.push(f);
                    ids.push(id);
                }
                Err(reason) => {
                    tracing::warn!(site = %self.cfg.site_id, case = %id, "case failed: {reason}");
                    self.state.failed.insert(id, reason);
                    self.save_state()?;
                    failures += 1;
                    continue;
                }
            }
            if ids.len() == self.cfg.window_size {
                self.emit(&preds, &feats, &ids)?;
                windows += 1;
                preds.clear();
                feats.clear();
                ids.clear();
            }
        }
        Ok((windows, failures))
    }

    fn emit(&mut self, preds: &[QualityPrediction], feats: &[FeatureVector], ids: &[String]) -> Result<(), AgentError> {
        let mut agg = SiteAggregator::new(&self.cfg.site_id, &self.model_version).resume_after(self.state.last_window_id);
        let report = agg.aggregate(preds, feats, ids, Utc::now())?;
        tracing::info!(site = %report.site_id, window = report.window_id, cases = report.n_cases, "window complete");
        self.state.last_window_id = report.window_id;
        self.state.processed.extend(ids.iter().cloned());
        self.state.emitted.push(WindowRecord {
            window_id: report.window_id,
            n_cases: report.n_cases,
            bin_histogram: report.bin_histogram,
        });
        self.state.outbox.push(report);
        self.save_state()
    }

    fn post(&self, report: &SiteReport) -> Delivery {
        let url = format!("{}{REPORTS_PATH}", self.cfg.monitor_url.trim_end_matches('/'));
        let body = serde_json::to_vec(report).expect("report serializes");
        let mut req = self.http.post(&url).header("content-type", "application/json");
        if let Some(token) = &self.cfg.auth_token {
            req = req.header("authorization", format!("Bearer {token}"));
        }
        match req.send(&body[..]) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                match status {
                    200 => Delivery::Accepted,
                    409 => Delivery::Duplicate,
                    400..=499 => Delivery::Rejected(format!("{status}: {text}")),
                    _ => Delivery::Unreachable(format!("{status}: {text}")),
                }
            }
            Err(e) => Delivery::Unreachable(e.to_string()),
        }
    }

    /// Sends queued reports in order, retrying each with bounded
    /// exponential backoff. Stops at the first report that cannot be
    /// delivered; it stays queued for the next flush.
    pub fn flush(&mut self) -> Result<FlushOutcome, AgentError> {
        let mut out = FlushOutcome::default();
        while let Some(report) = self.state.outbox.first().cloned() {
            let mut attempt = 0;
            let delivery = loop {
                attempt += 1;
                match self.post(&report) {
                    Delivery::Unreachable(msg) if attempt < self.cfg.retry.max_attempts => {
                        let wait = self.cfg.retry.backoff(attempt);
                        tracing::warn!(window = report.window_id, attempt, ?wait, "monitor unreachable: {msg}");
                        thread::sleep(wait);
                    }
                    d => break d,
                }
            };
            match delivery {
                Delivery::Accepted => out.delivered += 1,
                Delivery::Duplicate => {
                    tracing::info!(window = report.window_id, "monitor already holds window");
                    out.duplicates += 1;
                }
                Delivery::Rejected(msg) => {
                    tracing::error!(window = report.window_id, "monitor rejected report: {msg}");
                    self.state.rejected.push((report.clone(), msg));
                    out.rejected += 1;
                }
                Delivery::Unreachable(msg) => {
                    tracing::warn!(window = report.window_id, "giving up for now: {msg}");
                    break;
                }
            }
            self.state.outbox.remove(0);
            self.save_state()?;
        }
        out.pending = self.state.outbox.len();
        Ok(out)
    }

    pub fn run_once(&mut self) -> Result<RunOutcome, AgentError> {
        let (windows_emitted, cases_failed) = self.process_pending()?;
        let flush = self.flush()?;
        Ok(RunOutcome {
            windows_emitted,
            cases_failed,
            flush,
        })
    }

    /// Polls until `stop` returns true.
    pub fn run(&mut self, mut stop: impl FnMut() -> bool) -> Result<(), AgentError> {
        let interval = Duration::from_millis(self.cfg.poll_interval_ms);
        while !stop() {
            let out = self.run_once()?;
            if out.windows_emitted > 0 || out.flush.delivered > 0 {
                tracing::debug!(?out, "agent cycle");
            }
            thread::sleep(interval);
        }
        Ok(())
    }
}

/// Input directory and state location of a config, for diagnostics.
pub fn describe(cfg: &AgentConfig) -> String {
    format!(
        "site {} -> {} (input {}, state {}, window {})",
        cfg.site_id,
        cfg.monitor_url,
        cfg.input_dir.display(),
        cfg.state_dir().display(),
        cfg.window_size
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            initial_backoff_ms: 100,
            max_backoff_ms: 1000,
            max_attempts: 10,
        };
        let ms: Vec<u128> = (1..=6).map(|a| p.backoff(a).as_millis()).collect();
        assert_eq!(ms, [100, 200, 400, 800, 1000, 1000]);
        assert_eq!(p.backoff(60).as_millis(), 1000);
    }

    #[test]
    fn config_rejects_unknown_fields_and_bad_values() {
        let ok = r#"{"site_id":"a","monitor_url":"http://x","model_path":"m.json","input_dir":"in","window_size":4}"#;
        let cfg: AgentConfig = serde_json::from_str(ok).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.lung_mode, LungMode::Heuristic);
        assert_eq!(cfg.state_dir(), Path::new("in/.segqc-agent"));
        let extra = ok.replace("\"window_size\":4", "\"window_size\":4,\"verbose\":true");
        assert!(serde_json::from_str::<AgentConfig>(&extra).is_err());
        let zero = AgentConfig { window_size: 0, ..cfg };
        assert!(zero.validate().is_err());
    }
}
