//! One-vs-rest linear SVM with class-weighted hinge loss.
//!
//! Each present class `c` gets a binary problem with `y_i = +1` for samples
//! of class `c` and `-1` otherwise:
//!
//! ```text
//! J_c(w, b) = (1/n) * [ sum_i s_i * max(0, 1 - y_i (w . x_i + b)) + (l2/2) * ||w||^2 ]
//! ```
//!
//! minimized by subgradient descent with step `STEP0 / sqrt(t + 1)`. The
//! best iterate seen is returned since subgradient steps are not monotone.
//! As for logistic regression the penalty weighs against the summed loss.

use crate::features::{FeatureVector, N_FEATURES};
use crate::models::bins::{QualityBin, N_BINS};
use crate::models::model::{ModelKind, TrainedModel};
use crate::models::scaler::fit_scaler;
use crate::models::weights::class_weights;
use crate::models::{check_inputs, FitReport, ModelError, TrainConfig};

const STEP0: f64 = 1.0;

/// One binary hinge problem on standardized features.
#[derive(Debug, Clone)]
pub struct HingeObjective<'a> {
    x: &'a [[f64; N_FEATURES]],
    y: Vec<f64>,
    s: Vec<f64>,
    l2: f64,
}

impl<'a> HingeObjective<'a> {
    pub fn one_vs_rest(
        x: &'a [[f64; N_FEATURES]],
        labels: &[QualityBin],
        class: QualityBin,
        class_weights: &[f64; N_BINS],
        l2: f64,
    ) -> Self {
        Self {
            x,
            y: labels.iter().map(|&b| if b == class { 1.0 } else { -1.0 }).collect(),
            s: labels.iter().map(|b| class_weights[b.index()]).collect(),
            l2,
        }
    }

    fn margin(&self, i: usize, w: &[f64; N_FEATURES], b: f64) -> f64 {
        self.y[i] * (b + (0..N_FEATURES).map(|j| w[j] * self.x[i][j]).sum::<f64>())
    }

    /// Weighted mean hinge loss without the penalty term.
    pub fn hinge_loss(&self, w: &[f64; N_FEATURES], b: f64) -> f64 {
        let total: f64 = (0..self.x.len())
            .map(|i| self.s[i] * (1.0 - self.margin(i, w, b)).max(0.0))
            .sum();
        total / self.x.len() as f64
    }

    fn penalty_weight(&self) -> f64 {
        self.l2 / self.x.len() as f64
    }

    pub fn value(&self, w: &[f64; N_FEATURES], b: f64) -> f64 {
        self.hinge_loss(w, b) + 0.5 * self.penalty_weight() * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// A subgradient; samples exactly on the margin contribute nothing.
    pub fn subgradient(&self, w: &[f64; N_FEATURES], b: f64) -> ([f64; N_FEATURES], f64) {
        let n = self.x.len() as f64;
        let lambda = self.penalty_weight();
        let mut gw: [f64; N_FEATURES] = std::array::from_fn(|j| lambda * w[j]);
        let mut gb = 0.0;
        for i in 0..self.x.len() {
            if self.margin(i, w, b) < 1.0 {
                let r = self.s[i] * self.y[i] / n;
                for j in 0..N_FEATURES {
                    gw[j] -= r * self.x[i][j];
                }
                gb -= r;
            }
        }
        (gw, gb)
    }

    pub fn minimize(&self, cfg: &TrainConfig) -> ([f64; N_FEATURES], f64, FitReport) {
        let mut w = [0.0; N_FEATURES];
        let mut b = 0.0;
        let mut best = (w, b, self.value(&w, b));
        let mut report = FitReport {
            iterations: 0,
            converged: false,
            objective: best.2,
        };
        for t in 0..cfg.max_iters {
            let (gw, gb) = self.subgradient(&w, b);
            let norm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
            if norm < cfg.tol {
                report.converged = true;
                break;
            }
            let eta = STEP0 / ((t + 1) as f64).sqrt();
            for j in 0..N_FEATURES {
                w[j] -= eta * gw[j];
            }
            b -= eta * gb;
            let f = self.value(&w, b);
            if f < best.2 {
                best = (w, b, f);
            }
            report.iterations = t + 1;
        }
        report.objective = best.2;
        (best.0, best.1, report)
    }
}

pub fn fit_linear_svm(
    x: &[FeatureVector],
    bins: &[QualityBin],
    cfg: &TrainConfig,
) -> Result<(TrainedModel, FitReport), ModelError> {
    let rows = check_inputs(x, bins.len())?;
    let weights = class_weights(bins, cfg.class_weighting)?;
    let scaler = fit_scaler(&rows)?;
    let z: Vec<[f64; N_FEATURES]> = rows.iter().map(|r| scaler.transform(r)).collect();

    let mut coefficients = vec![[0.0; N_FEATURES]; N_BINS];
    let mut intercepts = vec![0.0; N_BINS];
    let mut total = FitReport {
        iterations: 0,
        converged: true,
        objective: 0.0,
    };
    for class in QualityBin::ALL {
        if weights[class.index()] == 0.0 {
            continue;
        }
        let obj = HingeObjective::one_vs_rest(&z, bins, class, &weights, cfg.l2_strength);
        let (w, b, report) = obj.minimize(cfg);
        coefficients[class.index()] = w;
        intercepts[class.index()] = b;
        total.iterations = total.iterations.max(report.iterations);
        total.converged &= report.converged;
        total.objective += report.objective;
    }
    let model = TrainedModel::new(ModelKind::LinearSvm, scaler, coefficients, intercepts, weights.to_vec());
    Ok((model, total))
}

pub fn train_linear_svm(
    x: &[FeatureVector],
    bins: &[QualityBin],
    cfg: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    fit_linear_svm(x, bins, cfg).map(|(m, _)| m)
}
