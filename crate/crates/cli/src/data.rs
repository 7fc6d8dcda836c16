//! Loading manifests, labels and labeled datasets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use segqc_core::eval::{Dataset, LabeledCase};
use segqc_core::features::{read_feature_csv_file, FeatureRow};
use segqc_core::synth::{DatasetManifest, ManifestEntry, Split};
use segqc_core::{extract_case_files, FeatureVector, LungMode};

use crate::error::{usage, CliError};

/// Which cases of a manifest to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSel {
    Train,
    Test,
    #[default]
    All,
}

impl SplitSel {
    pub fn admits(self, s: Split) -> bool {
        match self {
            SplitSel::All => true,
            SplitSel::Train => s == Split::Train,
            SplitSel::Test => s == Split::Test,
        }
    }
}

impl FromStr for SplitSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(SplitSel::Train),
            "test" => Ok(SplitSel::Test),
            "all" => Ok(SplitSel::All),
            other => Err(format!("unknown split {other:?} (expected train, test or all)")),
        }
    }
}

impl fmt::Display for SplitSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitSel::Train => "train",
            SplitSel::Test => "test",
            SplitSel::All => "all",
        })
    }
}

pub fn parse_class_weighting(s: &str) -> Result<segqc_core::models::ClassWeighting, String> {
    use segqc_core::models::ClassWeighting;
    match s.to_ascii_lowercase().as_str() {
        "balanced" => Ok(ClassWeighting::Balanced),
        "uniform" | "none" => Ok(ClassWeighting::Uniform),
        other => Err(format!("unknown class weighting {other:?} (expected balanced or uniform)")),
    }
}

pub struct LoadedManifest {
    pub manifest: DatasetManifest,
    pub base: PathBuf,
    pub id: String,
}

impl LoadedManifest {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let manifest = DatasetManifest::read(path).map_err(|e| usage(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let id = base
            .file_name()
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Ok(Self { manifest, base, id })
    }

    pub fn entries(&self, split: SplitSel) -> impl Iterator<Item = &ManifestEntry> {
        self.manifest.cases.iter().filter(move |c| split.admits(c.split))
    }
}

/// Per-case extraction results in case-id order; failures carry a reason.
pub type Extracted = Vec<(String, Result<FeatureVector, String>)>;

/// Extracts features of the selected cases in parallel.
pub fn extract(m: &LoadedManifest, split: SplitSel, lung_mode: LungMode) -> Extracted {
    let entries: Vec<&ManifestEntry> = m.entries(split).collect();
    let mut out: Extracted = entries
        .par_iter()
        .map(|e| {
            let lung = m.base.join(&e.lung_mask);
            let f = extract_case_files(
                &m.base.join(&e.image),
                &m.base.join(&e.pred_mask),
                lung_mode,
                Some(&lung),
            );
            (e.case_id.clone(), f.map_err(|err| err.to_string()))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Splits extraction results into features and failures.
pub fn partition(ex: Extracted) -> (BTreeMap<String, FeatureVector>, Vec<(String, String)>) {
    let mut ok = BTreeMap::new();
    let mut failed = Vec::new();
    for (id, r) in ex {
        match r {
            Ok(f) => {
                ok.insert(id, f);
            }
            Err(e) => failed.push((id, e)),
        }
    }
    (ok, failed)
}

/// Labeled dataset from a manifest: features either from a features table
/// or extracted on the fly. Cases whose features fail are left out and
/// reported.
pub fn labeled(
    path: &Path,
    split: SplitSel,
    lung_mode: LungMode,
    features: Option<&Path>,
) -> Result<(Dataset, Vec<(String, String)>), CliError> {
    let m = LoadedManifest::open(path)?;
    let (feats, failed) = match features {
        Some(csv) => (read_features(csv)?, Vec::new()),
        None => partition(extract(&m, split, lung_mode)),
    };
    let mut cases = Vec::new();
    let mut missing = Vec::new();
    for e in m.entries(split) {
        match feats.get(&e.case_id) {
            Some(f) => cases.push(LabeledCase {
                case_id: e.case_id.clone(),
                features: *f,
                dice: e.true_dice,
            }),
            None if features.is_some() => missing.push((e.case_id.clone(), "not in features table".to_string())),
            None => {}
        }
    }
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    if cases.is_empty() {
        return Err(usage(format!("{}: no usable cases in split {split}", path.display())));
    }
    let mut failures = failed;
    failures.extend(missing);
    Ok((Dataset::new(m.id, cases), failures))
}

pub fn read_features(path: &Path) -> Result<BTreeMap<String, FeatureVector>, CliError> {
    let rows: Vec<FeatureRow> =
        read_feature_csv_file(path).map_err(|e| usage(format!("features {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for r in rows {
        let f = r.features();
        if out.insert(r.case_id.clone(), f).is_some() {
            return Err(usage(format!("features {}: duplicate case {}", path.display(), r.case_id)));
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    case_id: String,
    dice: f64,
}

/// Dice labels with their split. A `.json` path is read as a dataset
/// manifest, anything else as a `case_id,dice` table (split: train).
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, (f64, Split)>, CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let m = LoadedManifest::open(path)?;
        return Ok(m
            .manifest
            .cases
            .iter()
            .map(|c| (c.case_id.clone(), (c.true_dice, c.split)))
            .collect());
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| usage(format!("labels {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| usage(format!("labels {}: {e}", path.display())))?;
        if !(0.0..=1.0).contains(&row.dice) {
            return Err(usage(format!("labels {}: dice {} of {} outside [0, 1]", path.display(), row.dice, row.case_id)));
        }
        out.insert(row.case_id, (row.dice, Split::Train));
    }
    Ok(out)
}
