//! Ridge regression of Dice on standardized features.
//!
//! With centered columns the unpenalized intercept is `mean(y)` and the
//! weights solve `(Z^T Z + l2 I) w = Z^T (y - mean(y))`. Constant
//! (flagged) columns standardize to zero and are pinned at weight 0.

use nalgebra::{DMatrix, DVector};

use crate::features::{FeatureVector, N_FEATURES};
use crate::models::model::{ModelKind, TrainedModel};
use crate::models::scaler::fit_scaler;
use crate::models::{check_inputs, ModelError};

pub fn train_ridge(x: &[FeatureVector], dice: &[f64], l2_strength: f64) -> Result<TrainedModel, ModelError> {
    let rows = check_inputs(x, dice.len())?;
    if let Some(i) = dice.iter().position(|d| !d.is_finite()) {
        return Err(ModelError::NonFinite { row: i });
    }
    if !(l2_strength.is_finite() && l2_strength >= 0.0) {
        return Err(ModelError::InvalidConfig(format!("l2_strength {l2_strength}")));
    }
    let scaler = fit_scaler(&rows)?;
    let active: Vec<usize> = (0..N_FEATURES).filter(|&j| !scaler.flags[j]).collect();

    let n = rows.len();
    let y_mean = dice.iter().sum::<f64>() / n as f64;
    let mut coef = [0.0; N_FEATURES];
    if !active.is_empty() {
        let z = DMatrix::from_fn(n, active.len(), |i, k| {
            let j = active[k];
            (rows[i][j] - scaler.mean[j]) / scaler.std[j]
        });
        let yc = DVector::from_iterator(n, dice.iter().map(|d| d - y_mean));
        let gram = z.transpose() * &z + DMatrix::identity(active.len(), active.len()) * l2_strength;
        let rhs = z.transpose() * yc;
        let w = gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| gram.lu().solve(&rhs))
            .ok_or(ModelError::Singular)?;
        for (k, &j) in active.iter().enumerate() {
            coef[j] = w[k];
        }
    }
    Ok(TrainedModel::new(
        ModelKind::Ridge,
        scaler,
        vec![coef],
        vec![y_mean],
        Vec::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<FeatureVector> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                FeatureVector {
                    connected_components: (i % 7) as u32,
                    intensity_mode: -600.0 + 40.0 * (t * 0.9).sin(),
                    smoothness: 0.5 + 0.4 * (t * 0.37).cos(),
                    lesions_within_lungs: 0.7 + 0.002 * t,
                }
            })
            .collect()
    }

    #[test]
    fn exact_linear_target_is_recovered() {
        let x = rows(30);
        let truth = [0.01, 0.0005, 0.3, -0.2];
        let y: Vec<f64> = x
            .iter()
            .map(|f| 0.8 + f.to_array().iter().zip(truth).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let m = train_ridge(&x, &y, 0.0).unwrap();
        let (w, b) = m.raw_coefficients(0);
        for j in 0..4 {
            assert!((w[j] - truth[j]).abs() < 1e-9, "{j}: {} vs {}", w[j], truth[j]);
        }
        assert!((b - 0.8).abs() < 1e-9);
        for (f, t) in x.iter().zip(&y) {
            assert!((m.raw_score(f)[0] - t).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_penalty_predicts_mean() {
        let x = rows(25);
        let y: Vec<f64> = (0..25).map(|i| (i as f64 * 0.31).sin().abs()).collect();
        let m = train_ridge(&x, &y, 1e9).unwrap();
        assert!(m.coefficients[0].iter().all(|w| w.abs() < 1e-6));
        let mean = y.iter().sum::<f64>() / 25.0;
        assert!((m.raw_score(&x[3])[0] - mean).abs() < 1e-6);
    }

    #[test]
    fn constant_column_with_zero_penalty() {
        let mut x = rows(10);
        x.iter_mut().for_each(|f| f.lesions_within_lungs = 1.0);
        let y: Vec<f64> = x.iter().map(|f| f.smoothness).collect();
        let m = train_ridge(&x, &y, 0.0).unwrap();
        assert_eq!(m.coefficients[0][3], 0.0);
        assert!(m.scaler.flags[3]);
    }

    #[test]
    fn non_finite_target_rejected() {
        let x = rows(3);
        assert!(matches!(
            train_ridge(&x, &[0.1, f64::INFINITY, 0.2], 1.0),
            Err(ModelError::NonFinite { row: 1 })
        ));
    }
}
