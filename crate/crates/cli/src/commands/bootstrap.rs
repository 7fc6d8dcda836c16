use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use segqc_core::eval::{bootstrap_sensitivity, BootstrapConfig, Dataset, EvalError};
use segqc_core::models::ModelKind;
use segqc_core::LungMode;

use crate::commands::eval::eval_error;
use crate::config::{require_path, resolve, sidecar, write_json, write_run_manifest};
use crate::data::{labeled, SplitSel};
use crate::error::{partial_if_any, usage, CliError};

/// Training and evaluation sets shared by `bootstrap` and `ablate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSelection {
    pub train_manifest: PathBuf,
    pub train_split: SplitSel,
    pub eval_manifests: Vec<PathBuf>,
    pub eval_split: SplitSel,
    pub lung_mode: LungMode,
}

impl Default for DataSelection {
    fn default() -> Self {
        Self {
            train_manifest: PathBuf::new(),
            train_split: SplitSel::Train,
            eval_manifests: Vec::new(),
            eval_split: SplitSel::Test,
            lung_mode: LungMode::Heuristic,
        }
    }
}

impl DataSelection {
    pub fn load(&self) -> Result<(Dataset, Vec<Dataset>, Vec<(String, String)>), CliError> {
        require_path(&self.train_manifest, "--train-manifest")?;
        if self.eval_manifests.is_empty() {
            return Err(usage("need at least one --eval-manifest"));
        }
        let (train, mut failures) = labeled(&self.train_manifest, self.train_split, self.lung_mode, None)?;
        let mut evals = Vec::new();
        for p in &self.eval_manifests {
            let (d, f) = labeled(p, self.eval_split, self.lung_mode, None)?;
            failures.extend(f);
            evals.push(d);
        }
        Ok((train, evals, failures))
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Manifest of the training pool.
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    /// Cases of the training manifest to use (default train).
    #[arg(long)]
    train_split: Option<SplitSel>,
    /// Evaluation manifest; repeat for several datasets.
    #[arg(long = "eval-manifest")]
    eval_manifests: Vec<PathBuf>,
    /// Cases of the evaluation manifests to use (default test).
    #[arg(long)]
    eval_split: Option<SplitSel>,
    #[arg(long)]
    lung_mode: Option<LungMode>,
}

impl DataArgs {
    pub fn overrides(&self) -> serde_json::Value {
        json!({
            "train_manifest": self.train_manifest,
            "train_split": self.train_split,
            "eval_manifests": self.eval_manifests,
            "eval_split": self.eval_split,
            "lung_mode": self.lung_mode,
        })
    }
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// lr, svm or rr.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Run on one thread (results are identical either way).
    #[arg(long)]
    serial: bool,
    /// Sensitivity threshold for the one-sided p-value.
    #[arg(long)]
    threshold: Option<f64>,
    /// JSON output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapCmdConfig {
    pub data: DataSelection,
    pub bootstrap: BootstrapConfig,
    pub threshold: f64,
    pub out: PathBuf,
}

impl Default for BootstrapCmdConfig {
    fn default() -> Self {
        Self {
            data: DataSelection::default(),
            bootstrap: BootstrapConfig::default(),
            threshold: 0.7,
            out: PathBuf::new(),
        }
    }
}

#[derive(Serialize)]
struct BootstrapOutput<'a> {
    result: &'a segqc_core::eval::BootstrapResult,
    threshold: f64,
    p_value_below: f64,
}

pub fn run(a: BootstrapArgs) -> Result<(), CliError> {
    let cfg: BootstrapCmdConfig = resolve(
        a.config.as_deref(),
        json!({
            "data": a.data.overrides(),
            "bootstrap": {
                "runs": a.runs,
                "sample_size": a.sample_size,
                "seed": a.seed,
                "model": a.model,
                "parallel": a.serial.then_some(false),
            },
            "threshold": a.threshold,
            "out": a.out,
        }),
    )?;
    require_path(&cfg.out, "--out")?;
    let (train, evals, failures) = cfg.data.load()?;
    let res = bootstrap_sensitivity(&train, &evals, &cfg.bootstrap).map_err(|e| match e {
        EvalError::InvalidConfig(_) | EvalError::SingleClass | EvalError::NoFailedCases => usage(e),
        other => eval_error(other),
    })?;
    let p = res.p_value_below(cfg.threshold);
    write_json(
        &cfg.out,
        &BootstrapOutput {
            result: &res,
            threshold: cfg.threshold,
            p_value_below: p,
        },
    )?;
    write_run_manifest(&sidecar(&cfg.out), "bootstrap", &cfg)?;
    let (lo, hi) = res.ci95;
    println!(
        "{} runs of {} cases: sensitivity 95% CI [{lo:.3}, {hi:.3}], P(sensitivity <= {}) = {p:.4}",
        res.runs, res.sample_size, cfg.threshold
    );
    partial_if_any("feature extraction", &failures)
}
