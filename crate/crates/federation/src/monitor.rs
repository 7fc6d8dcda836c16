//! Central monitor: HTTP ingestion, append-only report log, fleet summary
//! and alerts.

use std::fs::{File, OpenOptions};
use std::future::Future;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::oneshot;

use segqc_core::federation::{
    evaluate_alerts, Alert, AlertRule, FederationError, FleetSummary, MergeOutcome, SiteReport, REPORT_FORMAT_VERSION,
};

use crate::wire::{Ack, AlertsBody, ErrorBody, Health, ALERTS_PATH, HEALTH_PATH, REPORTS_PATH, SUMMARY_PATH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub format_version: u32,
    pub bind: String,
    /// Append-only JSON-lines log of accepted reports.
    pub log_path: PathBuf,
    /// Reports from other model versions are flagged but still ingested.
    pub expected_model_version: Option<String>,
    /// Number of initial windows per site forming its feature baseline.
    pub baseline_windows: usize,
    pub rules: Vec<AlertRule>,
    /// When set, reports must carry `Authorization: Bearer <token>`.
    pub auth_token: Option<String>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            bind: "127.0.0.1:8750".into(),
            log_path: PathBuf::from("monitor-reports.jsonl"),
            expected_model_version: None,
            baseline_windows: 1,
            rules: vec![AlertRule::default()],
            auth_token: None,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), MonitorError> {
        if self.format_version != REPORT_FORMAT_VERSION {
            return Err(MonitorError::Config(format!(
                "format_version {} (expected {REPORT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.baseline_windows == 0 {
            return Err(MonitorError::Config("baseline_windows must be at least 1".into()));
        }
        for r in &self.rules {
            r.validate().map_err(|e| MonitorError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("invalid monitor config: {0}")]
    Config(String),
    #[error("report log {path}: line {line}: {message}")]
    CorruptLog { path: String, line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Why a report was not ingested.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Rejected(#[from] FederationError),
    #[error("report log: {0}")]
    Log(#[from] io::Error),
}

struct Inner {
    summary: FleetSummary,
    log: File,
}

/// Monitor state. A single lock serializes ingestion, which also gives
/// readers a consistent snapshot.
pub struct Monitor {
    inner: Mutex<Inner>,
    rules: Vec<AlertRule>,
    auth_token: Option<String>,
    log_path: PathBuf,
}

impl Monitor {
    /// Opens (or creates) the report log and replays it.
    pub fn open(cfg: &MonitorConfig) -> Result<Arc<Self>, MonitorError> {
        cfg.validate()?;
        let mut summary = FleetSummary::new(cfg.expected_model_version.clone(), cfg.baseline_windows);
        if let Some(dir) = cfg.log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut log = OpenOptions::new().create(true).read(true).append(true).open(&cfg.log_path)?;
        let replayed = replay(&mut log, &cfg.log_path, &mut summary)?;
        tracing::info!(path = %cfg.log_path.display(), replayed, "report log replayed");
        Ok(Arc::new(Self {
            inner: Mutex::new(Inner { summary, log }),
            rules: cfg.rules.clone(),
            auth_token: cfg.auth_token.clone(),
            log_path: cfg.log_path.clone(),
        }))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Validates `r`, appends it to the log and merges it.
    pub fn ingest(&self, r: SiteReport) -> Result<MergeOutcome, IngestError> {
        let mut inner = self.lock();
        if let Err(e) = inner.summary.check(&r) {
            tracing::info!(site = %r.site_id, window = r.window_id, "report rejected: {e}");
            return Err(e.into());
        }
        let mut line = serde_json::to_vec(&r).expect("report serializes");
        line.push(b'\n');
        inner.log.write_all(&line)?;
        inner.log.sync_data()?;
        let out = inner.summary.merge(r).expect("checked above");
        if out.model_version_flagged {
            tracing::warn!(site = %out.site_id, window = out.window_id, "unexpected model version");
        }
        Ok(out)
    }

    pub fn summary(&self) -> FleetSummary {
        self.lock().summary.clone()
    }

    pub fn alerts(&self) -> Vec<Alert> {
        evaluate_alerts(&self.lock().summary, &self.rules)
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    fn authorized(&self, headers: &HeaderMap) -> bool {
        let Some(token) = &self.auth_token else {
            return true;
        };
        headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token)
    }
}

/// Replays complete log lines into `summary`. A torn final line left by a
/// crash is truncated away.
fn replay(log: &mut File, path: &Path, summary: &mut FleetSummary) -> Result<usize, MonitorError> {
    let mut bytes = Vec::new();
    log.read_to_end(&mut bytes)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        tracing::warn!(path = %path.display(), dropped = bytes.len() - complete, "truncating torn log tail");
        log.set_len(complete as u64)?;
    }
    let corrupt = |line: usize, message: String| MonitorError::CorruptLog {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut n = 0;
    for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let r: SiteReport = serde_json::from_slice(line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        summary.merge(r).map_err(|e| corrupt(i + 1, e.to_string()))?;
        n += 1;
    }
    Ok(n)
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody::new(msg))).into_response()
}

async fn post_report(State(m): State<Arc<Monitor>>, headers: HeaderMap, body: Bytes) -> Response {
    if !m.authorized(&headers) {
        return error(StatusCode::UNAUTHORIZED, "missing or invalid bearer token");
    }
    let report: SiteReport = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, format!("schema violation: {e}")),
    };
    let res = tokio::task::spawn_blocking(move || m.ingest(report)).await;
    match res {
        Ok(Ok(out)) => Json(Ack {
            format_version: REPORT_FORMAT_VERSION,
            site_id: out.site_id,
            window_id: out.window_id,
            model_version_flagged: out.model_version_flagged,
        })
        .into_response(),
        Ok(Err(IngestError::Rejected(e @ FederationError::StaleWindow { .. }))) => {
            error(StatusCode::CONFLICT, e.to_string())
        }
        Ok(Err(IngestError::Rejected(e))) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Ok(Err(e @ IngestError::Log(_))) => {
            tracing::error!("{e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_summary(State(m): State<Arc<Monitor>>) -> Json<FleetSummary> {
    Json(m.summary())
}

async fn get_alerts(State(m): State<Arc<Monitor>>) -> Json<AlertsBody> {
    Json(AlertsBody {
        format_version: REPORT_FORMAT_VERSION,
        alerts: m.alerts(),
    })
}

async fn get_health(State(m): State<Arc<Monitor>>) -> Json<Health> {
    let s = m.summary();
    Json(Health {
        format_version: REPORT_FORMAT_VERSION,
        status: "ok".into(),
        sites: s.sites.len(),
        windows_ingested: s.windows_ingested,
    })
}

pub fn router(monitor: Arc<Monitor>) -> Router {
    Router::new()
        .route(REPORTS_PATH, post(post_report))
        .route(SUMMARY_PATH, get(get_summary))
        .route(ALERTS_PATH, get(get_alerts))
        .route(HEALTH_PATH, get(get_health))
        .with_state(monitor)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    monitor: Arc<Monitor>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(monitor)).with_graceful_shutdown(shutdown).await
}

/// A monitor running on its own runtime thread.
pub struct MonitorHandle {
    addr: SocketAddr,
    monitor: Arc<Monitor>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl MonitorHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn monitor(&self) -> &Arc<Monitor> {
        &self.monitor
    }

    /// Stops serving and waits for the server thread.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("monitor thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for MonitorHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

/// Opens the monitor and serves it on `cfg.bind` from a background thread.
/// Binding to port 0 picks a free port; see [`MonitorHandle::addr`].
pub fn spawn_monitor(cfg: &MonitorConfig) -> Result<MonitorHandle, MonitorError> {
    let monitor = Monitor::open(cfg)?;
    let listener = std::net::TcpListener::bind(&cfg.bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let m = Arc::clone(&monitor);
    let thread = std::thread::Builder::new().name("segqc-monitor".into()).spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            serve(listener, m, async {
                let _ = rx.await;
            })
            .await
        })
    })?;
    Ok(MonitorHandle {
        addr,
        monitor,
        stop: Some(tx),
        thread: Some(thread),
    })
}
