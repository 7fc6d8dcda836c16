use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use segqc_core::features::heuristic_lung_mask;
use segqc_core::models::{train, ModelKind, TrainConfig};
use segqc_core::nifti;
use segqc_core::synth::{build_dataset_with, case_files, DatasetConfig, PhantomCase, PhantomParams, Spectrum};
use segqc_core::{extract_features, Dims};

fn small(n: usize, seed: u64) -> DatasetConfig {
    DatasetConfig {
        n_cases: n,
        seed,
        spectrum: Spectrum::Uniform,
        phantom: PhantomParams {
            dims: Dims::new(16, 40, 40),
            ..PhantomParams::default()
        },
        ..DatasetConfig::default()
    }
}

/// Thirty small cases shared by all tests.
pub fn cases() -> &'static [PhantomCase] {
    static CASES: OnceLock<Vec<PhantomCase>> = OnceLock::new();
    CASES.get_or_init(|| build_dataset_with(&small(30, 71)).unwrap())
}

/// Writes a logistic model trained on a separate synthetic set.
pub fn write_model(dir: &Path) -> PathBuf {
    let train_set = build_dataset_with(&small(25, 5)).unwrap();
    let x: Vec<_> = train_set
        .iter()
        .map(|c| extract_features(&c.image, &c.pred_mask, &heuristic_lung_mask(&c.image).unwrap()).unwrap())
        .collect();
    let dice: Vec<f64> = train_set.iter().map(|c| c.true_dice).collect();
    let model = train(ModelKind::Logistic, &x, &dice, &TrainConfig::default()).unwrap();
    let path = dir.join("model.json");
    model.save_file(&path).unwrap();
    path
}

/// Copies a case into an agent input directory under `id`.
pub fn drop_case(dir: &Path, id: &str, c: &PhantomCase) {
    let [image, pred, lung, _] = case_files(id);
    nifti::write_volume_i16_file(dir.join(image), &c.image).unwrap();
    nifti::write_mask_file(dir.join(lung), &c.lung_mask).unwrap();
    nifti::write_mask_file(dir.join(pred), &c.pred_mask).unwrap();
}
