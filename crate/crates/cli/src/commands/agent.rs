use std::path::PathBuf;
use std::sync::atomic::Ordering;

use clap::Args;
use serde_json::json;

use segqc_core::LungMode;
use segqc_federation::agent::describe;
use segqc_federation::{Agent, AgentConfig, AgentError};

use crate::commands::signal::stop_flag;
use crate::config::{resolve, write_run_manifest};
use crate::error::{internal, usage, CliError};

#[derive(Debug, Args)]
pub struct AgentArgs {
    /// TOML or JSON agent config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    site_id: Option<String>,
    /// Monitor base URL, e.g. http://127.0.0.1:8750.
    #[arg(long)]
    monitor_url: Option<String>,
    #[arg(long)]
    model_path: Option<PathBuf>,
    /// Directory watched for `<id>_image` / `<id>_pred` [/ `<id>_lung`] NIfTI files.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Cases per report window.
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    lung_mode: Option<LungMode>,
    #[arg(long)]
    state_dir: Option<PathBuf>,
    #[arg(long)]
    poll_interval_ms: Option<u64>,
    /// Process what is there, deliver, and exit.
    #[arg(long)]
    once: bool,
}

fn agent_error(e: AgentError) -> CliError {
    match e {
        AgentError::Config(_) | AgentError::Model { .. } => usage(e),
        other => internal(other),
    }
}

pub fn run(a: AgentArgs) -> Result<(), CliError> {
    let cfg: AgentConfig = resolve(
        a.config.as_deref(),
        json!({
            "site_id": a.site_id,
            "monitor_url": a.monitor_url,
            "model_path": a.model_path,
            "input_dir": a.input_dir,
            "window_size": a.window_size,
            "lung_mode": a.lung_mode,
            "state_dir": a.state_dir,
            "poll_interval_ms": a.poll_interval_ms,
        }),
    )?;
    cfg.validate().map_err(agent_error)?;
    tracing::info!("{}", describe(&cfg));
    let mut agent = Agent::open(cfg.clone()).map_err(agent_error)?;
    write_run_manifest(&cfg.state_dir().join("run.json"), "agent", &cfg)?;

    if a.once {
        let out = agent.run_once().map_err(agent_error)?;
        println!(
            "windows emitted {}, cases failed {}, delivered {}, duplicates {}, rejected {}, pending {}",
            out.windows_emitted,
            out.cases_failed,
            out.flush.delivered,
            out.flush.duplicates,
            out.flush.rejected,
            out.flush.pending
        );
        if out.cases_failed > 0 || out.flush.rejected > 0 || out.flush.pending > 0 {
            return Err(CliError::Partial(format!(
                "{} case(s) failed, {} report(s) rejected, {} report(s) undelivered",
                out.cases_failed, out.flush.rejected, out.flush.pending
            )));
        }
        return Ok(());
    }
    let stop = stop_flag().map_err(internal)?;
    agent.run(|| stop.load(Ordering::SeqCst)).map_err(agent_error)?;
    tracing::info!("agent stopped");
    Ok(())
}
