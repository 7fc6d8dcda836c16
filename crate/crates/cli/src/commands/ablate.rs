use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use segqc_core::eval::{ablation, EvalError};
use segqc_core::models::{ClassWeighting, TrainConfig};

use crate::commands::bootstrap::{DataArgs, DataSelection};
use crate::commands::eval::eval_error;
use crate::config::{require_path, resolve, sidecar, write_json, write_run_manifest};
use crate::data::parse_class_weighting;
use crate::error::{partial_if_any, usage, CliError};

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// balanced or uniform.
    #[arg(long, value_parser = parse_class_weighting)]
    class_weighting: Option<ClassWeighting>,
    /// JSON output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub data: DataSelection,
    pub train: TrainConfig,
    pub out: PathBuf,
}

pub fn run(a: AblateArgs) -> Result<(), CliError> {
    let cfg: AblateConfig = resolve(
        a.config.as_deref(),
        json!({
            "data": a.data.overrides(),
            "train": {
                "l2_strength": a.l2,
                "max_iters": a.max_iters,
                "class_weighting": a.class_weighting,
            },
            "out": a.out,
        }),
    )?;
    require_path(&cfg.out, "--out")?;
    let (train, evals, failures) = cfg.data.load()?;
    let table = ablation(&train, &evals, &cfg.train).map_err(|e| match e {
        EvalError::SingleClass | EvalError::Empty => usage(e),
        other => eval_error(other),
    })?;
    print!("{}", table.render());
    write_json(&cfg.out, &table)?;
    write_run_manifest(&sidecar(&cfg.out), "ablate", &cfg)?;
    partial_if_any("feature extraction", &failures)
}
