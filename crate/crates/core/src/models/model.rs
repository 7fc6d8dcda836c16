//! Trained predictors, prediction and the versioned model file.

use serde::{Deserialize, Serialize};

use crate::features::{FeatureVector, FEATURE_VERSION, N_FEATURES};
use crate::models::bins::{QualityBin, BIN_EDGES, FAILED_DICE, N_BINS};
use crate::models::scaler::Scaler;
use crate::models::ModelError;

/// Current model file layout.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    LinearSvm,
    Ridge,
}

impl ModelKind {
    pub const fn is_classifier(self) -> bool {
        !matches!(self, ModelKind::Ridge)
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Ridge => "ridge",
        }
    }

    /// Column label used in report tables.
    pub const fn short_name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "LR",
            ModelKind::LinearSvm => "SVM",
            ModelKind::Ridge => "RR",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "logistic" | "lr" => Ok(ModelKind::Logistic),
            "linear_svm" | "svm" => Ok(ModelKind::LinearSvm),
            "ridge" | "rr" => Ok(ModelKind::Ridge),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

/// A linear quality predictor over standardized features.
///
/// Classifiers carry five rows (one per quality bin); rows of classes that
/// were absent from training have zero class weight and are never
/// predicted. Ridge models carry one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub feature_version: u32,
    pub scaler: Scaler,
    pub coefficients: Vec<[f64; N_FEATURES]>,
    pub intercepts: Vec<f64>,
    pub bin_edges: [f64; N_BINS + 1],
    pub class_weights: Vec<f64>,
}

/// Output of [`TrainedModel::predict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub predicted_bin: QualityBin,
    pub predicted_dice: f64,
    pub failed: bool,
}

/// A prediction tied to its case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityPrediction {
    pub case_id: String,
    pub predicted_bin: QualityBin,
    pub predicted_dice: f64,
    pub failed: bool,
}

impl Prediction {
    pub fn for_case(self, case_id: impl Into<String>) -> QualityPrediction {
        QualityPrediction {
            case_id: case_id.into(),
            predicted_bin: self.predicted_bin,
            predicted_dice: self.predicted_dice,
            failed: self.failed,
        }
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    #[serde(flatten)]
    model: &'a TrainedModel,
    crc32: u32,
}

impl TrainedModel {
    pub fn new(
        kind: ModelKind,
        scaler: Scaler,
        coefficients: Vec<[f64; N_FEATURES]>,
        intercepts: Vec<f64>,
        class_weights: Vec<f64>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind,
            feature_version: FEATURE_VERSION,
            scaler,
            coefficients,
            intercepts,
            bin_edges: BIN_EDGES,
            class_weights,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let rows = if self.kind.is_classifier() { N_BINS } else { 1 };
        if self.coefficients.len() != rows || self.intercepts.len() != rows {
            return Err(ModelError::Malformed(format!(
                "{} model needs {rows} coefficient rows, has {} (intercepts {})",
                self.kind,
                self.coefficients.len(),
                self.intercepts.len()
            )));
        }
        if self.kind.is_classifier() && self.class_weights.len() != N_BINS {
            return Err(ModelError::Malformed(format!(
                "classifier needs {N_BINS} class weights, has {}",
                self.class_weights.len()
            )));
        }
        if self.scaler.std.iter().any(|&s| !(s > 0.0)) {
            return Err(ModelError::Malformed("scaler std must be > 0".into()));
        }
        if self.bin_edges != BIN_EDGES {
            return Err(ModelError::Malformed(format!("unsupported bin edges {:?}", self.bin_edges)));
        }
        Ok(())
    }

    fn check_compatible(&self, f: &FeatureVector) -> Result<(), ModelError> {
        if self.feature_version != FEATURE_VERSION {
            return Err(ModelError::FeatureVersion {
                model: self.feature_version,
                expected: FEATURE_VERSION,
            });
        }
        if !f.is_finite() {
            return Err(ModelError::NonFinite { row: 0 });
        }
        Ok(())
    }

    /// Linear scores per row, before argmax or clamping.
    pub fn raw_score(&self, f: &FeatureVector) -> Vec<f64> {
        let z = self.scaler.transform(&f.to_array());
        self.coefficients
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + w.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    /// Class scores (classifiers) or the unclamped regression output.
    pub fn decision_scores(&self, f: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        self.check_compatible(f)?;
        Ok(self.raw_score(f))
    }

    /// Coefficients mapped back to raw feature units: `(weights, intercept)`.
    pub fn raw_coefficients(&self, row: usize) -> ([f64; N_FEATURES], f64) {
        let w = self.coefficients[row];
        let s = &self.scaler;
        let raw: [f64; N_FEATURES] = std::array::from_fn(|j| w[j] / s.std[j]);
        let b = self.intercepts[row] - (0..N_FEATURES).map(|j| raw[j] * s.mean[j]).sum::<f64>();
        (raw, b)
    }

    pub fn predict(&self, f: &FeatureVector) -> Result<Prediction, ModelError> {
        let scores = self.decision_scores(f)?;
        if self.kind.is_classifier() {
            let mut best: Option<(usize, f64)> = None;
            for (c, &s) in scores.iter().enumerate() {
                if self.class_weights[c] <= 0.0 {
                    continue;
                }
                // strict comparison: ties stay with the lower bin
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((c, s));
                }
            }
            let (c, _) = best.ok_or_else(|| ModelError::Malformed("no active classes".into()))?;
            let bin = QualityBin::new(c as u8).expect("class index < 5");
            Ok(Prediction {
                predicted_bin: bin,
                predicted_dice: bin.midpoint(),
                failed: bin.is_failed(),
            })
        } else {
            let dice = scores[0].clamp(0.0, 1.0);
            Ok(Prediction {
                predicted_bin: QualityBin::from_dice(dice),
                predicted_dice: dice,
                failed: dice < FAILED_DICE,
            })
        }
    }

    fn checksum(&self) -> u32 {
        let canonical = serde_json::to_vec(self).expect("model serializes");
        crc32fast::hash(&canonical)
    }

    /// Serializes to the JSON model file, including a CRC-32 of the
    /// compact serialization of every other field.
    pub fn save(&self) -> Vec<u8> {
        let doc = ModelFileRef {
            model: self,
            crc32: self.checksum(),
        };
        let mut out = serde_json::to_vec_pretty(&doc).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut doc: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| ModelError::Malformed("model file is not a JSON object".into()))?;
        let version = obj
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::Malformed("missing format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(ModelError::FormatVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let stored = obj
            .remove("crc32")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::Malformed("missing crc32".into()))?;
        let model: TrainedModel =
            serde_json::from_value(doc).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let actual = model.checksum();
        if stored != actual as u64 {
            return Err(ModelError::Checksum {
                stored,
                computed: actual,
            });
        }
        model.validate()?;
        Ok(model)
    }

    pub fn save_file(&self, path: impl AsRef<std::path::Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.save())?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self, ModelError> {
        Self::load(&std::fs::read(path)?)
    }
}
