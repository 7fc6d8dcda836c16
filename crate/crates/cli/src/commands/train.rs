use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use segqc_core::models::{train, ClassWeighting, ModelError, ModelKind, TrainConfig};

use crate::config::{require_path, resolve, sidecar, write_run_manifest};
use crate::data::{parse_class_weighting, read_features, read_labels, SplitSel};
use crate::error::{internal, usage, CliError};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Features CSV written by `extract`.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Dataset manifest (.json) or `case_id,dice` CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Cases to train on when labels come from a manifest: train, test or all.
    #[arg(long)]
    split: Option<SplitSel>,
    /// lr, svm or rr.
    #[arg(long)]
    kind: Option<ModelKind>,
    /// L2 penalty strength (1.0 is the usual C = 1).
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// balanced or uniform.
    #[arg(long, value_parser = parse_class_weighting)]
    class_weighting: Option<ClassWeighting>,
    /// Recorded in the model's run manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub split: SplitSel,
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            features: PathBuf::new(),
            labels: PathBuf::new(),
            split: SplitSel::All,
            kind: ModelKind::Logistic,
            train: TrainConfig::default(),
            out: PathBuf::new(),
        }
    }
}

pub fn run(a: TrainArgs) -> Result<(), CliError> {
    let cfg: TrainCmdConfig = resolve(
        a.config.as_deref(),
        json!({
            "features": a.features,
            "labels": a.labels,
            "split": a.split,
            "kind": a.kind,
            "train": {
                "l2_strength": a.l2,
                "max_iters": a.max_iters,
                "class_weighting": a.class_weighting,
                "seed": a.seed,
            },
            "out": a.out,
        }),
    )?;
    require_path(&cfg.features, "--features")?;
    require_path(&cfg.labels, "--labels")?;
    require_path(&cfg.out, "--out")?;
    let feats = read_features(&cfg.features)?;
    let labels = read_labels(&cfg.labels)?;
    let mut x = Vec::new();
    let mut dice = Vec::new();
    for (id, f) in &feats {
        match labels.get(id) {
            Some(&(d, split)) if cfg.split.admits(split) => {
                x.push(*f);
                dice.push(d);
            }
            Some(_) => {}
            None => return Err(usage(format!("case {id} has features but no label"))),
        }
    }
    if x.is_empty() {
        return Err(usage(format!("no labeled cases in split {}", cfg.split)));
    }
    let model = train(cfg.kind, &x, &dice, &cfg.train).map_err(|e| match e {
        ModelError::Singular => internal(e),
        other => usage(other),
    })?;
    model.save_file(&cfg.out).map_err(internal)?;
    write_run_manifest(&sidecar(&cfg.out), "train", &cfg)?;
    println!("trained {} on {} cases -> {}", cfg.kind, x.len(), cfg.out.display());
    Ok(())
}
