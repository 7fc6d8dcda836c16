//! Leave-one-feature-out ablation for logistic regression.
//!
//! A left-out feature is replaced by zero in both training and evaluation
//! data. The scaler flags the constant column, so its weight stays at zero
//! and the model is exactly the three-feature model.

use serde::{Deserialize, Serialize};

use crate::eval::report::evaluate;
use crate::eval::{Dataset, EvalError, Sensitivity};
use crate::features::{FeatureName, FeatureVector};
use crate::models::{train_logistic, QualityBin, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` for the full model.
    pub left_out: Option<FeatureName>,
    pub sensitivity: Sensitivity,
    pub sensitivity_value: Option<f64>,
    pub specificity_avg: f64,
    /// Ablated minus full; `None` when sensitivity is undefined.
    pub delta_sensitivity: Option<f64>,
    pub delta_specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub baseline: AblationRow,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn render(&self) -> String {
        let fmt_opt = |v: Option<f64>, signed: bool| match v {
            Some(v) if signed => format!("{v:+.3}"),
            Some(v) => format!("{v:.3}"),
            None => "undefined".to_string(),
        };
        let mut out = format!(
            "{:<22}{:>14}{:>10}{:>14}{:>10}\n",
            "left out", "sensitivity", "Δ", "specificity", "Δ"
        );
        for r in std::iter::once(&self.baseline).chain(&self.rows) {
            let name = r.left_out.map_or("(none)", FeatureName::as_str);
            out.push_str(&format!(
                "{:<22}{:>14}{:>10}{:>14.3}{:>10}\n",
                name,
                fmt_opt(r.sensitivity_value, false),
                fmt_opt(r.delta_sensitivity, true),
                r.specificity_avg,
                format!("{:+.3}", r.delta_specificity),
            ));
        }
        out
    }
}

/// Copy of `f` with one feature zeroed.
pub fn without_feature(f: &FeatureVector, name: FeatureName) -> FeatureVector {
    let mut out = *f;
    match name {
        FeatureName::ConnectedComponents => out.connected_components = 0,
        FeatureName::IntensityMode => out.intensity_mode = 0.0,
        FeatureName::Smoothness => out.smoothness = 0.0,
        FeatureName::LesionsWithinLungs => out.lesions_within_lungs = 0.0,
    }
    out
}

fn masked(d: &Dataset, name: Option<FeatureName>) -> Dataset {
    let mut d = d.clone();
    if let Some(name) = name {
        for c in &mut d.cases {
            c.features = without_feature(&c.features, name);
        }
    }
    d
}

fn row(train: &Dataset, eval: &Dataset, name: Option<FeatureName>, cfg: &TrainConfig) -> Result<AblationRow, EvalError> {
    let t = masked(train, name);
    let bins: Vec<QualityBin> = t.dice().iter().map(|&d| QualityBin::from_dice(d)).collect();
    let model = train_logistic(&t.features(), &bins, cfg)?;
    let r = evaluate(&model, &masked(eval, name))?;
    Ok(AblationRow {
        left_out: name,
        sensitivity: r.sensitivity,
        sensitivity_value: r.sensitivity_value,
        specificity_avg: r.specificity_avg,
        delta_sensitivity: None,
        delta_specificity: 0.0,
    })
}

/// Full-model row plus one row per left-out feature, evaluated on the
/// pooled evaluation sets.
pub fn ablation(train_set: &Dataset, eval_sets: &[Dataset], cfg: &TrainConfig) -> Result<AblationTable, EvalError> {
    let eval = Dataset::pooled("pooled", eval_sets);
    let mut baseline = row(train_set, &eval, None, cfg)?;
    baseline.delta_sensitivity = baseline.sensitivity_value.map(|_| 0.0);
    let rows = FeatureName::ALL
        .iter()
        .map(|&name| {
            let mut r = row(train_set, &eval, Some(name), cfg)?;
            r.delta_sensitivity = r.sensitivity_value.zip(baseline.sensitivity_value).map(|(a, b)| a - b);
            r.delta_specificity = r.specificity_avg - baseline.specificity_avg;
            Ok(r)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(AblationTable { baseline, rows })
}
