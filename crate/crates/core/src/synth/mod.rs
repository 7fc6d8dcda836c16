//! Reproducible CT phantoms with known lungs and lesions, corrupted
//! predictions across the quality spectrum, and dataset manifests.

mod corrupt;
mod dataset;
mod morphology;
mod phantom;

use thiserror::Error;

use crate::eval::EvalError;
use crate::nifti::NiftiError;
use crate::volume::{Dims, GridError};

pub use corrupt::{corrupt_mask, Corruption, CorruptionKind, SCATTER_BLOB};
pub use dataset::{
    bin_quota, build_dataset, build_dataset_with, case_files, split_for, target_bins, write_dataset, DatasetConfig,
    DatasetManifest, ManifestEntry, PhantomCase, Spectrum, Split, MANIFEST_FILE, MANIFEST_VERSION, MIN_PER_BIN,
};
pub use morphology::{dilate26, dilate6, erode6, translate, NEIGHBORS_6};
pub use phantom::{generate_phantom, Phantom, PhantomParams, MIN_DIMS};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("dims {dims:?} too small for lungs; need at least {min:?}")]
    TooSmall { dims: Dims, min: Dims },
    #[error("invalid phantom params: {0}")]
    InvalidParams(String),
    #[error("placed {placed} of {requested} separated lesions")]
    PlacementFailed { placed: usize, requested: usize },
    #[error("unknown corruption kind {0:?}")]
    UnknownKind(String),
    #[error("unknown spectrum {0:?} (expected uniform or skewed_good)")]
    UnknownSpectrum(String),
    #[error("{n} cases cannot cover 5 bins with {min} or more cases in total")]
    TooFewCases { n: usize, min: usize },
    #[error("bin coverage not achievable: {case_id} missed bin {bin} after {attempts} phantoms")]
    BinCoverage { case_id: String, bin: u8, attempts: usize },
    #[error("unsupported manifest format_version {0}")]
    ManifestVersion(u32),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nifti(#[from] NiftiError),
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
