//! Quality predictors: five-bin classifiers with class weighting and a
//! ridge regressor on Dice.

mod bins;
mod logistic;
mod model;
mod ridge;
mod scaler;
mod svm;
mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, N_FEATURES};

pub use bins::{QualityBin, BIN_EDGES, FAILED_DICE, N_BINS};
pub use logistic::{fit_logistic, train_logistic, LogisticObjective, PARAMS_PER_CLASS};
pub use model::{ModelKind, Prediction, QualityPrediction, TrainedModel, FORMAT_VERSION};
pub use ridge::train_ridge;
pub use scaler::{fit_scaler, Scaler};
pub use svm::{fit_linear_svm, train_linear_svm, HingeObjective};
pub use weights::{balanced_class_weights, class_counts, class_weights, ClassWeighting};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training input")]
    EmptyInput,
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("degenerate labels: {classes} distinct class(es), need at least 2")]
    DegenerateLabels { classes: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("ridge system is singular")]
    Singular,
    #[error("model feature_version {model} is incompatible with feature_version {expected}")]
    FeatureVersion { model: u32, expected: u32 },
    #[error("unsupported model format_version {found} (expected {expected})")]
    FormatVersion { found: u64, expected: u32 },
    #[error("model checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u64, computed: u32 },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Settings shared by the iterative classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub max_iters: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
    /// Recorded for reproducibility; both optimizers are full-batch and
    /// draw no random numbers.
    pub seed: u64,
    pub class_weighting: ClassWeighting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            max_iters: 5000,
            tol: 1e-6,
            seed: 0,
            class_weighting: ClassWeighting::Balanced,
        }
    }
}

/// Optimizer diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

/// Any of the three model families, for callers that pick one at runtime.
pub fn train(
    kind: ModelKind,
    x: &[FeatureVector],
    dice: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    match kind {
        ModelKind::Ridge => train_ridge(x, dice, cfg.l2_strength),
        ModelKind::Logistic | ModelKind::LinearSvm => {
            let bins: Vec<QualityBin> = dice.iter().map(|&d| QualityBin::from_dice(d)).collect();
            if kind == ModelKind::Logistic {
                train_logistic(x, &bins, cfg)
            } else {
                train_linear_svm(x, &bins, cfg)
            }
        }
    }
}

fn check_inputs(x: &[FeatureVector], n_labels: usize) -> Result<Vec<[f64; N_FEATURES]>, ModelError> {
    if x.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if x.len() != n_labels {
        return Err(ModelError::LengthMismatch {
            features: x.len(),
            labels: n_labels,
        });
    }
    if let Some(row) = x.iter().position(|f| !f.is_finite()) {
        return Err(ModelError::NonFinite { row });
    }
    Ok(x.iter().map(FeatureVector::to_array).collect())
}
