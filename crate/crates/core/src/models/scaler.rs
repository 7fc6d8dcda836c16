use serde::{Deserialize, Serialize};

use crate::features::N_FEATURES;
use crate::models::ModelError;

/// Below this population std a feature is treated as constant.
const ZERO_VARIANCE: f64 = 1e-12;

/// Per-feature standardization `(x - mean) / std`.
///
/// Constant features are stored with `std = 1` and flagged, so they
/// standardize to a constant instead of dividing by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaler {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
    /// `true` where the training feature had zero variance.
    pub flags: [bool; N_FEATURES],
}

impl Scaler {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; N_FEATURES],
            std: [1.0; N_FEATURES],
            flags: [false; N_FEATURES],
        }
    }

    pub fn transform(&self, x: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|j| (x[j] - self.mean[j]) / self.std[j])
    }
}

/// Fits means and population standard deviations.
pub fn fit_scaler(rows: &[[f64; N_FEATURES]]) -> Result<Scaler, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; N_FEATURES];
    for r in rows {
        for j in 0..N_FEATURES {
            mean[j] += r[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; N_FEATURES];
    for r in rows {
        for j in 0..N_FEATURES {
            var[j] += (r[j] - mean[j]).powi(2);
        }
    }
    let mut std = [1.0; N_FEATURES];
    let mut flags = [false; N_FEATURES];
    for j in 0..N_FEATURES {
        let s = (var[j] / n).sqrt();
        if s > ZERO_VARIANCE {
            std[j] = s;
        } else {
            flags[j] = true;
        }
    }
    Ok(Scaler { mean, std, flags })
}
