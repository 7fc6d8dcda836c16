use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::metrics::{mae, sensitivity_failed, specificity_bins, MeanStd, Sensitivity};
use crate::eval::{Dataset, EvalError};
use crate::models::{ModelKind, QualityBin, QualityPrediction, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub true_dice: f64,
    pub true_bin: QualityBin,
    pub predicted_bin: QualityBin,
    pub predicted_dice: f64,
    pub failed: bool,
}

/// Metrics of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub model_kind: ModelKind,
    pub sensitivity: Sensitivity,
    /// `detected / total_failed`, or `null` when the dataset has no failed case.
    pub sensitivity_value: Option<f64>,
    pub specificity_avg: f64,
    pub mae: MeanStd,
    pub cases: Vec<CaseRecord>,
}

pub fn evaluate(model: &TrainedModel, data: &Dataset) -> Result<EvalReport, EvalError> {
    if data.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut preds = Vec::with_capacity(data.len());
    for c in &data.cases {
        preds.push(model.predict(&c.features)?.for_case(c.case_id.clone()));
    }
    let truth = data.dice();
    let sensitivity = sensitivity_failed(&preds, &truth)?;
    let true_bins: Vec<QualityBin> = truth.iter().map(|&d| QualityBin::from_dice(d)).collect();
    let pred_bins: Vec<QualityBin> = preds.iter().map(|p| p.predicted_bin).collect();
    let specificity_avg = specificity_bins(&pred_bins, &true_bins)?;
    let pred_dice: Vec<f64> = preds.iter().map(|p| p.predicted_dice).collect();
    let mae = mae(&pred_dice, &truth)?;
    let cases = preds
        .into_iter()
        .zip(&data.cases)
        .map(|(p, c): (QualityPrediction, _)| CaseRecord {
            case_id: p.case_id,
            true_dice: c.dice,
            true_bin: QualityBin::from_dice(c.dice),
            predicted_bin: p.predicted_bin,
            predicted_dice: p.predicted_dice,
            failed: p.failed,
        })
        .collect();
    Ok(EvalReport {
        dataset_id: data.id.clone(),
        model_kind: model.kind,
        sensitivity,
        sensitivity_value: sensitivity.value(),
        specificity_avg,
        mae,
        cases,
    })
}

/// Text table with one column per model and, per metric, one row per
/// dataset. Datasets and models appear in first-seen order; a missing
/// combination renders as `-`.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut models: Vec<ModelKind> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset_id.as_str()) {
            datasets.push(&r.dataset_id);
        }
        if !models.contains(&r.model_kind) {
            models.push(r.model_kind);
        }
    }
    let find = |d: &str, m: ModelKind| reports.iter().find(|r| r.dataset_id == d && r.model_kind == m);

    let metrics: [(&str, fn(&EvalReport) -> String); 3] = [
        ("Sensitivity", |r| r.sensitivity.to_string()),
        ("Specificity", |r| format!("{:.2}", r.specificity_avg)),
        ("MAE", |r| r.mae.to_string()),
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Metric".to_string(), "Dataset".to_string()];
    header.extend(models.iter().map(|m| m.short_name().to_string()));
    rows.push(header);
    for (name, cell) in metrics {
        for (i, d) in datasets.iter().enumerate() {
            let mut row = vec![
                if i == 0 { name.to_string() } else { String::new() },
                d.to_string(),
            ];
            row.extend(models.iter().map(|&m| find(d, m).map_or("-".to_string(), cell)));
            rows.push(row);
        }
    }

    let ncol = rows[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (k, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if k == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (ncol - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}
