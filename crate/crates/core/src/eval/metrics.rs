use serde::{Deserialize, Serialize};

use crate::eval::EvalError;
use crate::models::{QualityBin, QualityPrediction, FAILED_DICE, N_BINS};
use crate::volume::Mask;

/// Dice overlap `2|a ∩ b| / (|a| + |b|)`; two empty masks score 1.0.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64, EvalError> {
    let inter = a.intersection_count(b)?;
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Detection rate of failed masks. `value` is `None` when the set contains
/// no failed case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub detected: usize,
    pub total_failed: usize,
}

impl Sensitivity {
    pub fn value(&self) -> Option<f64> {
        (self.total_failed > 0).then(|| self.detected as f64 / self.total_failed as f64)
    }

    pub fn merge(self, other: Sensitivity) -> Sensitivity {
        Sensitivity {
            detected: self.detected + other.detected,
            total_failed: self.total_failed + other.total_failed,
        }
    }
}

impl std::fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v:.2} ({}/{})", self.detected, self.total_failed),
            None => write!(f, "undefined (0/0)"),
        }
    }
}

fn check_aligned(a: usize, b: usize) -> Result<(), EvalError> {
    if a == 0 {
        return Err(EvalError::Empty);
    }
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Among cases with true Dice below 0.6, how many carry the `failed` flag.
pub fn sensitivity_failed(preds: &[QualityPrediction], truths: &[f64]) -> Result<Sensitivity, EvalError> {
    check_aligned(preds.len(), truths.len())?;
    let mut s = Sensitivity {
        detected: 0,
        total_failed: 0,
    };
    for (p, &t) in preds.iter().zip(truths) {
        if t < FAILED_DICE {
            s.total_failed += 1;
            if p.failed {
                s.detected += 1;
            }
        }
    }
    Ok(s)
}

/// One-vs-rest specificity `TN / (TN + FP)` averaged over the five bins.
/// A bin without negatives contributes 1.0.
pub fn specificity_bins(pred: &[QualityBin], truth: &[QualityBin]) -> Result<f64, EvalError> {
    check_aligned(pred.len(), truth.len())?;
    let mut total = 0.0;
    for b in QualityBin::ALL {
        let (mut tn, mut fp) = (0usize, 0usize);
        for (&p, &t) in pred.iter().zip(truth) {
            if t != b {
                if p == b {
                    fp += 1;
                } else {
                    tn += 1;
                }
            }
        }
        total += if tn + fp == 0 {
            1.0
        } else {
            tn as f64 / (tn + fp) as f64
        };
    }
    Ok(total / N_BINS as f64)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<MeanStd, EvalError> {
    check_aligned(predicted.len(), truth.len())?;
    let err: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    let n = err.len() as f64;
    let mean = err.iter().sum::<f64>() / n;
    let var = err.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(MeanStd { mean, std: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, Spacing};

    fn bins(v: &[u8]) -> Vec<QualityBin> {
        v.iter().map(|&b| QualityBin::new(b).unwrap()).collect()
    }

    fn pred(failed: bool) -> QualityPrediction {
        QualityPrediction {
            case_id: String::new(),
            predicted_bin: QualityBin::new(if failed { 1 } else { 4 }).unwrap(),
            predicted_dice: 0.0,
            failed,
        }
    }

    #[test]
    fn dice_fixtures() {
        let d = Dims::new(1, 2, 3);
        let s = Spacing::default();
        let a = Mask::from_voxels(d, s, &[(0, 0, 0), (0, 0, 1)]).unwrap();
        let b = Mask::from_voxels(d, s, &[(0, 0, 0), (0, 0, 1), (0, 1, 1)]).unwrap();
        let c = Mask::from_voxels(d, s, &[(0, 1, 2)]).unwrap();
        let e = Mask::empty(d, s).unwrap();
        assert_eq!(dice(&a, &b).unwrap(), 0.8);
        assert_eq!(dice(&b, &a).unwrap(), 0.8);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(dice(&a, &e).unwrap(), 0.0);
        let other = Mask::empty(Dims::new(2, 2, 3), s).unwrap();
        assert!(dice(&a, &other).is_err());
    }

    #[test]
    fn sensitivity_fixture_28_of_37() {
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for i in 0..37 {
            preds.push(pred(i < 28));
            truth.push(0.3);
        }
        for _ in 0..13 {
            preds.push(pred(false));
            truth.push(0.8);
        }
        let s = sensitivity_failed(&preds, &truth).unwrap();
        assert_eq!((s.detected, s.total_failed), (28, 37));
        assert!((s.value().unwrap() - 0.76).abs() < 0.005);
        assert_eq!(s.to_string(), "0.76 (28/37)");
    }

    #[test]
    fn sensitivity_edge_cases() {
        let s = sensitivity_failed(&[pred(true), pred(false)], &[0.9, 0.6]).unwrap();
        assert_eq!(s.value(), None);
        assert_eq!(s.to_string(), "undefined (0/0)");
        let s = sensitivity_failed(&[pred(true), pred(true)], &[0.1, 0.59]).unwrap();
        assert_eq!(s.value(), Some(1.0));
        assert!(matches!(sensitivity_failed(&[], &[]), Err(EvalError::Empty)));
        assert!(matches!(
            sensitivity_failed(&[pred(true)], &[0.1, 0.2]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn specificity_fixtures() {
        assert_eq!(specificity_bins(&bins(&[0, 1, 2, 3, 4]), &bins(&[0, 1, 2, 3, 4])).unwrap(), 1.0);
        let s = specificity_bins(&bins(&[3, 4, 4]), &bins(&[3, 3, 4])).unwrap();
        assert!((s - 0.9).abs() < 1e-12);
        // everything predicted as bin 0, nothing truly in bin 0
        let s = specificity_bins(&bins(&[0, 0, 0]), &bins(&[2, 3, 4])).unwrap();
        // bin 0: TN 0 FP 3 -> 0; bins 2,3,4: TN 2 FP 0 -> 1; bin 1: TN 3 -> 1
        assert!((s - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mae_fixtures() {
        let m = mae(&[0.2, 0.4], &[0.2, 0.4]).unwrap();
        assert_eq!((m.mean, m.std), (0.0, 0.0));
        let m = mae(&[0.5], &[0.7]).unwrap();
        assert!((m.mean - 0.2).abs() < 1e-12 && m.std == 0.0);
        let mid = QualityBin::new(3).unwrap().midpoint();
        assert!((mae(&[mid], &[0.75]).unwrap().mean - 0.05).abs() < 1e-12);
        let m = mae(&[0.0, 0.0], &[0.1, 0.3]).unwrap();
        assert!((m.mean - 0.2).abs() < 1e-12 && (m.std - 0.1).abs() < 1e-12);
    }
}
