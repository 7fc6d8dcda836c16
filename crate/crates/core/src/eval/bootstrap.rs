//! Bootstrap distribution of failed-mask sensitivity.
//!
//! Run `r` draws `sample_size` training cases with replacement using a
//! ChaCha8 stream seeded by the master seed with stream id `r`, so every run
//! is reproducible on its own and serial and parallel execution agree bit
//! for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::report::evaluate;
use crate::eval::{Dataset, EvalError, Sensitivity};
use crate::features::FeatureVector;
use crate::models::{train, ModelKind, QualityBin, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub runs: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub model: ModelKind,
    pub train: TrainConfig,
    /// Draws allowed per run before giving up on a two-class resample.
    pub max_redraws: usize,
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            runs: 10_000,
            sample_size: 192,
            seed: 0,
            model: ModelKind::Logistic,
            train: TrainConfig::default(),
            max_redraws: 1000,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSensitivities {
    pub dataset_id: String,
    pub sensitivities: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub runs: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub model: ModelKind,
    /// Resamples discarded for containing a single quality bin.
    pub redraws: usize,
    /// Sensitivity pooled over all evaluation sets, one entry per run.
    pub sensitivities: Vec<f64>,
    pub per_dataset: Vec<DatasetSensitivities>,
    pub ci95: (f64, f64),
}

impl BootstrapResult {
    /// Fraction of runs whose sensitivity is at most `threshold`.
    pub fn p_value_below(&self, threshold: f64) -> f64 {
        let k = self.sensitivities.iter().filter(|&&s| s <= threshold).count();
        k as f64 / self.sensitivities.len() as f64
    }
}

/// Nearest-rank 2.5th and 97.5th percentiles; both bounds are sample values.
pub fn percentile_ci(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = |p: f64| ((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
    (s[rank(0.025)], s[rank(0.975)])
}

struct RunOutcome {
    redraws: usize,
    per_dataset: Vec<Sensitivity>,
}

fn distinct_bins(dice: &[f64]) -> usize {
    let mut seen = [false; 5];
    for &d in dice {
        seen[QualityBin::from_dice(d).index()] = true;
    }
    seen.iter().filter(|&&b| b).count()
}

fn one_run(run: usize, train_set: &Dataset, eval_sets: &[Dataset], cfg: &BootstrapConfig) -> Result<RunOutcome, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run as u64);
    let n = train_set.len();
    let mut x: Vec<FeatureVector> = Vec::with_capacity(cfg.sample_size);
    let mut y: Vec<f64> = Vec::with_capacity(cfg.sample_size);
    let mut attempts = 0;
    loop {
        attempts += 1;
        x.clear();
        y.clear();
        for _ in 0..cfg.sample_size {
            let c = &train_set.cases[rng.random_range(0..n)];
            x.push(c.features);
            y.push(c.dice);
        }
        if distinct_bins(&y) >= 2 {
            break;
        }
        if attempts >= cfg.max_redraws {
            return Err(EvalError::RedrawBudget { run, attempts });
        }
    }
    let model = train(cfg.model, &x, &y, &cfg.train)?;
    let per_dataset = eval_sets
        .iter()
        .map(|d| evaluate(&model, d).map(|r| r.sensitivity))
        .collect::<Result<_, _>>()?;
    Ok(RunOutcome {
        redraws: attempts - 1,
        per_dataset,
    })
}

pub fn bootstrap_sensitivity(
    train_set: &Dataset,
    eval_sets: &[Dataset],
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult, EvalError> {
    if cfg.runs == 0 || cfg.sample_size == 0 || cfg.max_redraws == 0 {
        return Err(EvalError::InvalidConfig(
            "runs, sample_size and max_redraws must be positive".into(),
        ));
    }
    if train_set.is_empty() || eval_sets.is_empty() || eval_sets.iter().any(Dataset::is_empty) {
        return Err(EvalError::Empty);
    }
    if distinct_bins(&train_set.dice()) < 2 {
        return Err(EvalError::SingleClass);
    }
    let total_failed: usize = eval_sets
        .iter()
        .flat_map(|d| &d.cases)
        .filter(|c| QualityBin::from_dice(c.dice).is_failed())
        .count();
    if total_failed == 0 {
        return Err(EvalError::NoFailedCases);
    }

    let outcomes: Vec<RunOutcome> = if cfg.parallel {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| one_run(r, train_set, eval_sets, cfg))
            .collect::<Result<_, _>>()?
    } else {
        (0..cfg.runs)
            .map(|r| one_run(r, train_set, eval_sets, cfg))
            .collect::<Result<_, _>>()?
    };

    let sensitivities: Vec<f64> = outcomes
        .iter()
        .map(|o| {
            let pooled = o.per_dataset.iter().fold(Sensitivity::default(), |a, &s| a.merge(s));
            pooled.value().expect("pooled sets contain failed cases")
        })
        .collect();
    let per_dataset = eval_sets
        .iter()
        .enumerate()
        .map(|(k, d)| DatasetSensitivities {
            dataset_id: d.id.clone(),
            sensitivities: outcomes.iter().map(|o| o.per_dataset[k].value()).collect(),
        })
        .collect();
    tracing::debug!(runs = cfg.runs, "bootstrap finished");
    Ok(BootstrapResult {
        runs: cfg.runs,
        sample_size: cfg.sample_size,
        seed: cfg.seed,
        model: cfg.model,
        redraws: outcomes.iter().map(|o| o.redraws).sum(),
        ci95: percentile_ci(&sensitivities),
        sensitivities,
        per_dataset,
    })
}
