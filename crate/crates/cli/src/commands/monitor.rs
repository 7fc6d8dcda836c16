use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use segqc_federation::{serve, Monitor, MonitorConfig, MonitorError};

use crate::commands::signal::terminated;
use crate::config::{resolve, sidecar, write_run_manifest};
use crate::error::{internal, usage, CliError};

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// TOML or JSON monitor config (including alert rules).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Address to listen on; port 0 picks a free port.
    #[arg(long)]
    bind: Option<String>,
    /// Append-only report log, replayed at startup.
    #[arg(long)]
    log_path: Option<PathBuf>,
    #[arg(long)]
    expected_model_version: Option<String>,
    #[arg(long)]
    baseline_windows: Option<usize>,
}

pub fn run(a: MonitorArgs) -> Result<(), CliError> {
    let cfg: MonitorConfig = resolve(
        a.config.as_deref(),
        json!({
            "bind": a.bind,
            "log_path": a.log_path,
            "expected_model_version": a.expected_model_version,
            "baseline_windows": a.baseline_windows,
        }),
    )?;
    let monitor = Monitor::open(&cfg).map_err(|e| match e {
        MonitorError::Config(_) | MonitorError::CorruptLog { .. } => usage(e),
        other => internal(other),
    })?;
    write_run_manifest(&sidecar(&cfg.log_path), "monitor", &cfg)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(internal)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| usage(format!("bind {}: {e}", cfg.bind)))?;
        let addr = listener.local_addr().map_err(internal)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        tracing::info!(sites = monitor.summary().sites.len(), "monitor ready");
        serve(listener, monitor, terminated()).await.map_err(internal)
    })?;
    tracing::info!("monitor stopped");
    Ok(())
}
