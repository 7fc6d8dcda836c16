use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use segqc_core::synth::{
    build_dataset_with, write_dataset, DatasetConfig, PhantomParams, Spectrum, SynthError, MANIFEST_FILE,
    MANIFEST_VERSION,
};

use crate::config::{require_path, resolve, write_run_manifest};
use crate::error::{internal, usage, CliError};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML or JSON file with any of the settings below (plus `phantom`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of cases.
    #[arg(short = 'n', long)]
    n_cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// uniform or skewed-good.
    #[arg(long)]
    spectrum: Option<Spectrum>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub format_version: u32,
    pub n_cases: usize,
    pub seed: u64,
    pub spectrum: Spectrum,
    pub out: PathBuf,
    pub phantom: PhantomParams,
    pub max_lesions: usize,
    pub max_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            format_version: MANIFEST_VERSION,
            n_cases: d.n_cases,
            seed: d.seed,
            spectrum: d.spectrum,
            out: PathBuf::new(),
            phantom: d.phantom,
            max_lesions: d.max_lesions,
            max_attempts: d.max_attempts,
        }
    }
}

pub fn run(a: SynthArgs) -> Result<(), CliError> {
    let cfg: SynthConfig = resolve(
        a.config.as_deref(),
        json!({
            "n_cases": a.n_cases,
            "seed": a.seed,
            "spectrum": a.spectrum,
            "out": a.out,
        }),
    )?;
    require_path(&cfg.out, "--out")?;
    if cfg.n_cases == 0 {
        return Err(usage("--n-cases must be at least 1"));
    }
    let ds = DatasetConfig {
        n_cases: cfg.n_cases,
        seed: cfg.seed,
        spectrum: cfg.spectrum,
        phantom: cfg.phantom.clone(),
        max_lesions: cfg.max_lesions,
        max_attempts: cfg.max_attempts,
        ..DatasetConfig::default()
    };
    let cases = build_dataset_with(&ds).map_err(|e| match e {
        SynthError::TooFewCases { .. }
        | SynthError::TooSmall { .. }
        | SynthError::InvalidParams(_)
        | SynthError::Grid(_) => usage(e),
        other => internal(other),
    })?;
    let manifest = write_dataset(&cases, &ds, &cfg.out).map_err(internal)?;
    write_run_manifest(&cfg.out.join("run.json"), "synth", &cfg)?;
    let mut bins = [0usize; 5];
    for c in &cases {
        bins[segqc_core::models::QualityBin::from_dice(c.true_dice).index()] += 1;
    }
    println!(
        "wrote {} cases to {} (bins {:?}, manifest {})",
        manifest.n_cases,
        cfg.out.display(),
        bins,
        MANIFEST_FILE
    );
    Ok(())
}
