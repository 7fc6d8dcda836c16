//! Feature extraction straight from a case's NIfTI files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_features, heuristic_lung_mask, FeatureError, FeatureVector};
use crate::nifti::{self, NiftiError};

/// Where the lung mask of a case comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LungMode {
    /// Thresholded from the image.
    #[default]
    Heuristic,
    /// Read from a provided mask file.
    File,
}

impl fmt::Display for LungMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LungMode::Heuristic => "heuristic",
            LungMode::File => "file",
        })
    }
}

impl FromStr for LungMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heuristic" => Ok(LungMode::Heuristic),
            "file" => Ok(LungMode::File),
            other => Err(format!("unknown lung mode {other:?} (expected heuristic or file)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("{path}: {source}")]
    Nifti {
        path: String,
        #[source]
        source: NiftiError,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("lung mode is file but no lung mask path was given")]
    MissingLungMask,
}

fn nifti_err(path: &Path) -> impl FnOnce(NiftiError) -> CaseError + '_ {
    move |source| CaseError::Nifti {
        path: path.display().to_string(),
        source,
    }
}

/// Reads image and predicted mask, obtains the lung mask according to
/// `mode`, and computes the four features.
pub fn extract_case_files(
    image: &Path,
    pred: &Path,
    mode: LungMode,
    lung: Option<&Path>,
) -> Result<FeatureVector, CaseError> {
    let img = nifti::read_volume(image).map_err(nifti_err(image))?;
    let pred_mask = nifti::read_mask(pred).map_err(nifti_err(pred))?;
    let lung_mask = match mode {
        LungMode::Heuristic => heuristic_lung_mask(&img)?,
        LungMode::File => {
            let path = lung.ok_or(CaseError::MissingLungMask)?;
            nifti::read_mask(path).map_err(nifti_err(path))?
        }
    };
    Ok(extract_features(&img, &pred_mask, &lung_mask)?)
}
