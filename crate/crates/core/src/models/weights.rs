use serde::{Deserialize, Serialize};

use crate::models::bins::{QualityBin, N_BINS};
use crate::models::ModelError;

/// How per-class loss weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// `n / (k_present * n_c)`.
    #[default]
    Balanced,
    /// 1.0 for every present class.
    Uniform,
}

pub fn class_counts(labels: &[QualityBin]) -> [usize; N_BINS] {
    let mut counts = [0usize; N_BINS];
    for b in labels {
        counts[b.index()] += 1;
    }
    counts
}

/// Balanced class weights `w_c = n / (k_present * n_c)`; absent classes get 0.
pub fn balanced_class_weights(labels: &[QualityBin]) -> Result<[f64; N_BINS], ModelError> {
    class_weights(labels, ClassWeighting::Balanced)
}

pub fn class_weights(labels: &[QualityBin], scheme: ClassWeighting) -> Result<[f64; N_BINS], ModelError> {
    let counts = class_counts(labels);
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(ModelError::DegenerateLabels { classes: present });
    }
    let n = labels.len() as f64;
    Ok(std::array::from_fn(|c| match (counts[c], scheme) {
        (0, _) => 0.0,
        (nc, ClassWeighting::Balanced) => n / (present as f64 * nc as f64),
        (_, ClassWeighting::Uniform) => 1.0,
    }))
}
