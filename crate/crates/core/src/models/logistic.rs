//! Class-weighted multinomial logistic regression.
//!
//! Objective over the classes present in the training labels:
//!
//! ```text
//! L(W, b) = (1/n) * [ sum_i s_i * (logsumexp_k z_ik - z_i,y_i) + (l2/2) * ||W||^2 ]
//! z_ik    = W_k . x_i + b_k
//! ```
//!
//! with `s_i` the weight of sample `i`'s class. The penalty weighs against
//! the summed loss, so `l2 = 1` is the usual `C = 1` library default; the
//! overall `1/n` only keeps gradients on a per-sample scale. Intercepts are
//! not penalized. The minimizer is plain full-batch gradient descent with
//! Armijo backtracking, so results depend only on data order and config.

use crate::features::{FeatureVector, N_FEATURES};
use crate::models::bins::{QualityBin, N_BINS};
use crate::models::model::{ModelKind, TrainedModel};
use crate::models::scaler::fit_scaler;
use crate::models::weights::class_weights;
use crate::models::{check_inputs, FitReport, ModelError, TrainConfig};

/// Parameters per class: four weights followed by the intercept.
pub const PARAMS_PER_CLASS: usize = N_FEATURES + 1;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// The training objective on standardized features.
///
/// Parameter layout: for each active class in increasing bin order,
/// `[w_0, w_1, w_2, w_3, b]`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    x: Vec<[f64; N_FEATURES]>,
    targets: Vec<usize>,
    sample_weights: Vec<f64>,
    classes: Vec<QualityBin>,
    l2: f64,
}

impl LogisticObjective {
    /// Classes with a zero weight are left out of the softmax entirely.
    pub fn new(
        x: Vec<[f64; N_FEATURES]>,
        labels: &[QualityBin],
        class_weights: &[f64; N_BINS],
        l2: f64,
    ) -> Self {
        let classes: Vec<QualityBin> = QualityBin::ALL
            .into_iter()
            .filter(|b| class_weights[b.index()] > 0.0)
            .collect();
        let mut slot = [usize::MAX; N_BINS];
        for (k, b) in classes.iter().enumerate() {
            slot[b.index()] = k;
        }
        let targets = labels.iter().map(|b| slot[b.index()]).collect();
        let sample_weights = labels.iter().map(|b| class_weights[b.index()]).collect();
        Self {
            x,
            targets,
            sample_weights,
            classes,
            l2,
        }
    }

    pub fn classes(&self) -> &[QualityBin] {
        &self.classes
    }

    pub fn n_params(&self) -> usize {
        self.classes.len() * PARAMS_PER_CLASS
    }

    fn logits(&self, params: &[f64], x: &[f64; N_FEATURES], out: &mut [f64]) {
        for (k, z) in out.iter_mut().enumerate() {
            let p = &params[k * PARAMS_PER_CLASS..(k + 1) * PARAMS_PER_CLASS];
            *z = p[N_FEATURES] + (0..N_FEATURES).map(|j| p[j] * x[j]).sum::<f64>();
        }
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let sq: f64 = params
            .chunks_exact(PARAMS_PER_CLASS)
            .flat_map(|p| &p[..N_FEATURES])
            .map(|w| w * w)
            .sum();
        0.5 * self.penalty_weight() * sq
    }

    /// `l2 / n`: the penalty after dividing the whole objective by `n`.
    fn penalty_weight(&self) -> f64 {
        self.l2 / self.x.len() as f64
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let k = self.classes.len();
        let mut z = vec![0.0; k];
        let mut loss = 0.0;
        for (i, x) in self.x.iter().enumerate() {
            if self.targets[i] == usize::MAX {
                continue;
            }
            self.logits(params, x, &mut z);
            let lse = log_sum_exp(&z);
            loss += self.sample_weights[i] * (lse - z[self.targets[i]]);
        }
        loss / self.x.len() as f64 + self.penalty(params)
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let k = self.classes.len();
        let n = self.x.len() as f64;
        let mut grad = vec![0.0; params.len()];
        let mut z = vec![0.0; k];
        let mut loss = 0.0;
        for (i, x) in self.x.iter().enumerate() {
            let t = self.targets[i];
            if t == usize::MAX {
                continue;
            }
            let s = self.sample_weights[i];
            self.logits(params, x, &mut z);
            let lse = log_sum_exp(&z);
            loss += s * (lse - z[t]);
            for c in 0..k {
                let p = (z[c] - lse).exp();
                let r = s * (p - if c == t { 1.0 } else { 0.0 }) / n;
                let g = &mut grad[c * PARAMS_PER_CLASS..(c + 1) * PARAMS_PER_CLASS];
                for j in 0..N_FEATURES {
                    g[j] += r * x[j];
                }
                g[N_FEATURES] += r;
            }
        }
        let lambda = self.penalty_weight();
        for (g, p) in grad.chunks_exact_mut(PARAMS_PER_CLASS).zip(params.chunks_exact(PARAMS_PER_CLASS)) {
            for j in 0..N_FEATURES {
                g[j] += lambda * p[j];
            }
        }
        (loss / n + self.penalty(params), grad)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gradient descent with backtracking; stops when the gradient max-norm
/// drops below `tol` or after `max_iters` steps.
pub(crate) fn minimize(obj: &LogisticObjective, cfg: &TrainConfig) -> (Vec<f64>, FitReport) {
    let mut params = vec![0.0; obj.n_params()];
    let (mut f, mut g) = obj.value_and_gradient(&params);
    let mut step = 1.0;
    let mut report = FitReport {
        iterations: 0,
        converged: false,
        objective: f,
    };
    let mut candidate = vec![0.0; params.len()];
    for it in 0..cfg.max_iters {
        if max_abs(&g) < cfg.tol {
            report.converged = true;
            break;
        }
        let gg: f64 = g.iter().map(|v| v * v).sum();
        loop {
            for ((c, p), d) in candidate.iter_mut().zip(&params).zip(&g) {
                *c = p - step * d;
            }
            let fc = obj.value(&candidate);
            if fc <= f - ARMIJO * step * gg || step < MIN_STEP {
                break;
            }
            step *= 0.5;
        }
        if step < MIN_STEP {
            tracing::debug!(iteration = it, "line search stalled");
            break;
        }
        std::mem::swap(&mut params, &mut candidate);
        (f, g) = obj.value_and_gradient(&params);
        report.iterations = it + 1;
        step *= 2.0;
    }
    if !report.converged && max_abs(&g) < cfg.tol {
        report.converged = true;
    }
    report.objective = f;
    (params, report)
}

pub fn fit_logistic(
    x: &[FeatureVector],
    bins: &[QualityBin],
    cfg: &TrainConfig,
) -> Result<(TrainedModel, FitReport), ModelError> {
    let rows = check_inputs(x, bins.len())?;
    let weights = class_weights(bins, cfg.class_weighting)?;
    let scaler = fit_scaler(&rows)?;
    let z = rows.iter().map(|r| scaler.transform(r)).collect();
    let obj = LogisticObjective::new(z, bins, &weights, cfg.l2_strength);
    let (params, report) = minimize(&obj, cfg);

    let mut coefficients = vec![[0.0; N_FEATURES]; N_BINS];
    let mut intercepts = vec![0.0; N_BINS];
    for (k, b) in obj.classes().iter().enumerate() {
        let p = &params[k * PARAMS_PER_CLASS..(k + 1) * PARAMS_PER_CLASS];
        coefficients[b.index()].copy_from_slice(&p[..N_FEATURES]);
        intercepts[b.index()] = p[N_FEATURES];
    }
    let model = TrainedModel::new(ModelKind::Logistic, scaler, coefficients, intercepts, weights.to_vec());
    Ok((model, report))
}

/// Trains the multinomial classifier; see [`fit_logistic`] for diagnostics.
pub fn train_logistic(
    x: &[FeatureVector],
    bins: &[QualityBin],
    cfg: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    fit_logistic(x, bins, cfg).map(|(m, _)| m)
}
