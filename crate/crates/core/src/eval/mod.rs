//! Evaluation: overlap and detection metrics, per-dataset reports, the
//! bootstrap sensitivity analysis and single-feature ablation.

mod ablation;
mod bootstrap;
mod metrics;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::models::ModelError;
use crate::volume::GridError;

pub use ablation::{ablation, without_feature, AblationRow, AblationTable};
pub use bootstrap::{bootstrap_sensitivity, percentile_ci, BootstrapConfig, BootstrapResult, DatasetSensitivities};
pub use metrics::{dice, mae, sensitivity_failed, specificity_bins, MeanStd, Sensitivity};
pub use report::{evaluate, render_table, CaseRecord, EvalReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty case list")]
    Empty,
    #[error("misaligned inputs: {left} vs {right} entries")]
    LengthMismatch { left: usize, right: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("impossible resampling: training set has a single class")]
    SingleClass,
    #[error("run {run}: no two-class resample after {attempts} draws")]
    RedrawBudget { run: usize, attempts: usize },
    #[error("evaluation sets contain no failed case; sensitivity is undefined")]
    NoFailedCases,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// A case with its features and ground-truth Dice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub case_id: String,
    pub features: FeatureVector,
    pub dice: f64,
}

/// A named collection of labeled cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub cases: Vec<LabeledCase>,
}

impl Dataset {
    pub fn new(id: impl Into<String>, cases: Vec<LabeledCase>) -> Self {
        Self { id: id.into(), cases }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.cases.iter().map(|c| c.features).collect()
    }

    pub fn dice(&self) -> Vec<f64> {
        self.cases.iter().map(|c| c.dice).collect()
    }

    /// Concatenation of several datasets under a new id.
    pub fn pooled(id: impl Into<String>, sets: &[Dataset]) -> Self {
        Self::new(id, sets.iter().flat_map(|d| d.cases.iter().cloned()).collect())
    }
}
