use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use segqc_core::eval::{evaluate, render_table, EvalError, EvalReport};
use segqc_core::models::{ModelError, TrainedModel};
use segqc_core::LungMode;

use crate::config::{resolve, sidecar, write_json, write_run_manifest};
use crate::data::{labeled, SplitSel};
use crate::error::{internal, partial_if_any, usage, CliError};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file; repeat to compare models.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Dataset manifest; repeat for several datasets.
    #[arg(long = "manifest")]
    manifests: Vec<PathBuf>,
    /// train, test or all.
    #[arg(long)]
    split: Option<SplitSel>,
    #[arg(long)]
    lung_mode: Option<LungMode>,
    /// Precomputed features (only with a single manifest).
    #[arg(long)]
    features: Option<PathBuf>,
    /// JSON file receiving the reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub models: Vec<PathBuf>,
    pub manifests: Vec<PathBuf>,
    pub split: SplitSel,
    pub lung_mode: LungMode,
    pub features: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub(crate) fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Model(m @ ModelError::FeatureVersion { .. }) => usage(format!("refused: {m}")),
        EvalError::Model(m) => usage(m),
        other => internal(other),
    }
}

pub fn run(a: EvalArgs) -> Result<(), CliError> {
    let cfg: EvalConfig = resolve(
        a.config.as_deref(),
        json!({
            "models": a.models,
            "manifests": a.manifests,
            "split": a.split,
            "lung_mode": a.lung_mode,
            "features": a.features,
            "out": a.out,
        }),
    )?;
    if cfg.models.is_empty() || cfg.manifests.is_empty() {
        return Err(usage("need at least one --model and one --manifest"));
    }
    if cfg.features.is_some() && cfg.manifests.len() > 1 {
        return Err(usage("--features can only be combined with a single --manifest"));
    }
    let models = cfg
        .models
        .iter()
        .map(|p| TrainedModel::load_file(p).map_err(|e| usage(format!("model {}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut reports: Vec<EvalReport> = Vec::new();
    let mut failures = Vec::new();
    for path in &cfg.manifests {
        let (data, failed) = labeled(path, cfg.split, cfg.lung_mode, cfg.features.as_deref())?;
        failures.extend(failed);
        for m in &models {
            reports.push(evaluate(m, &data).map_err(eval_error)?);
        }
    }
    print!("{}", render_table(&reports));
    if let Some(out) = &cfg.out {
        write_json(out, &reports)?;
        write_run_manifest(&sidecar(out), "eval", &cfg)?;
    }
    partial_if_any("feature extraction", &failures)
}
