use std::fs::File;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use segqc_core::features::{write_feature_csv, FeatureRow};
use segqc_core::LungMode;

use crate::config::{require_path, resolve, sidecar, write_run_manifest};
use crate::data::{extract, LoadedManifest, SplitSel};
use crate::error::{internal, partial_if_any, CliError};

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// heuristic (threshold the image) or file (use the manifest's lung masks).
    #[arg(long)]
    lung_mode: Option<LungMode>,
    /// train, test or all.
    #[arg(long)]
    split: Option<SplitSel>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub manifest: PathBuf,
    pub lung_mode: LungMode,
    pub split: SplitSel,
    pub out: PathBuf,
}

pub fn run(a: ExtractArgs) -> Result<(), CliError> {
    let cfg: ExtractConfig = resolve(
        a.config.as_deref(),
        json!({
            "manifest": a.manifest,
            "lung_mode": a.lung_mode,
            "split": a.split,
            "out": a.out,
        }),
    )?;
    require_path(&cfg.manifest, "--manifest")?;
    require_path(&cfg.out, "--out")?;
    let m = LoadedManifest::open(&cfg.manifest)?;
    let results = extract(&m, cfg.split, cfg.lung_mode);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(f) => rows.push(FeatureRow::new(id, &f)),
            Err(e) => failures.push((id, e)),
        }
    }
    let file = File::create(&cfg.out).map_err(|e| internal(format!("{}: {e}", cfg.out.display())))?;
    write_feature_csv(file, &rows).map_err(internal)?;
    write_run_manifest(&sidecar(&cfg.out), "extract", &cfg)?;
    println!("wrote {} feature rows to {}", rows.len(), cfg.out.display());
    partial_if_any("extraction", &failures)
}
