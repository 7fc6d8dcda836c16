//! Ground-truth-free quality features of a predicted lesion mask.
//!
//! Four numbers per case: the number of 26-connected components, the mean
//! intensity of the largest component, the inter-slice smoothness and the
//! fraction of lesion voxels inside the lungs.

mod components;
mod lung;
mod measures;

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{Dims, Mask, Volume};

pub(crate) use components::NEIGHBORS_26;
pub use components::{label_components, LabeledComponents};
pub use lung::{fill_slice_holes, heuristic_lung_mask, LUNG_THRESHOLD_HU};
pub use measures::{
    intensity_mode, intensity_mode_labeled, lesion_containment, smoothness, smoothness_labeled,
};

/// Bumped whenever a feature definition changes; models record the version
/// they were trained against.
pub const FEATURE_VERSION: u32 = 1;

/// Number of features in a [`FeatureVector`].
pub const N_FEATURES: usize = 4;

/// Intensity reported for an empty prediction.
pub const EMPTY_INTENSITY_HU: f64 = 0.0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{what} dims {actual:?} do not match {expected:?}")]
    DimMismatch {
        what: &'static str,
        expected: Dims,
        actual: Dims,
    },
    #[error("empty mask")]
    EmptyMask,
    #[error("no lung found")]
    NoLungFound,
    #[error("features csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    ConnectedComponents,
    IntensityMode,
    Smoothness,
    LesionsWithinLungs,
}

impl FeatureName {
    pub const ALL: [FeatureName; N_FEATURES] = [
        FeatureName::ConnectedComponents,
        FeatureName::IntensityMode,
        FeatureName::Smoothness,
        FeatureName::LesionsWithinLungs,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            FeatureName::ConnectedComponents => "connected_components",
            FeatureName::IntensityMode => "intensity_mode",
            FeatureName::Smoothness => "smoothness",
            FeatureName::LesionsWithinLungs => "lesions_within_lungs",
        }
    }
}

impl std::fmt::Display for FeatureName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub connected_components: u32,
    /// Hounsfield units.
    pub intensity_mode: f64,
    pub smoothness: f64,
    pub lesions_within_lungs: f64,
}

impl FeatureVector {
    /// Feature vector of an empty prediction.
    pub const EMPTY: FeatureVector = FeatureVector {
        connected_components: 0,
        intensity_mode: EMPTY_INTENSITY_HU,
        smoothness: 1.0,
        lesions_within_lungs: 1.0,
    };

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.connected_components as f64,
            self.intensity_mode,
            self.smoothness,
            self.lesions_within_lungs,
        ]
    }

    pub fn get(&self, name: FeatureName) -> f64 {
        self.to_array()[name.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Computes the four features. All three grids must share dims.
pub fn extract_features(img: &Volume, pred: &Mask, lung: &Mask) -> Result<FeatureVector, FeatureError> {
    for (what, d) in [("image", img.dims()), ("lung mask", lung.dims())] {
        if d != pred.dims() {
            return Err(FeatureError::DimMismatch {
                what,
                expected: pred.dims(),
                actual: d,
            });
        }
    }
    let labels = label_components(pred);
    if labels.count() == 0 {
        return Ok(FeatureVector::EMPTY);
    }
    Ok(FeatureVector {
        connected_components: labels.count() as u32,
        intensity_mode: intensity_mode_labeled(img, &labels)?,
        smoothness: smoothness_labeled(&labels),
        lesions_within_lungs: lesion_containment(pred, lung)?,
    })
}

/// One row of the features CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub case_id: String,
    pub n_components: u32,
    pub intensity_mode_hu: f64,
    pub smoothness: f64,
    pub containment: f64,
}

impl FeatureRow {
    pub fn new(case_id: impl Into<String>, f: &FeatureVector) -> Self {
        Self {
            case_id: case_id.into(),
            n_components: f.connected_components,
            intensity_mode_hu: f.intensity_mode,
            smoothness: f.smoothness,
            containment: f.lesions_within_lungs,
        }
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector {
            connected_components: self.n_components,
            intensity_mode: self.intensity_mode_hu,
            smoothness: self.smoothness,
            lesions_within_lungs: self.containment,
        }
    }
}

pub fn write_feature_csv<W: io::Write>(w: W, rows: &[FeatureRow]) -> Result<(), FeatureError> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: io::Read>(r: R) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn read_feature_csv_file(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>, FeatureError> {
    read_feature_csv(std::fs::File::open(path)?)
}
