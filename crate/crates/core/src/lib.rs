//! Quality control for lung-lesion segmentation masks without ground truth.
//!
//! The crate computes four lightweight features per predicted mask, trains
//! linear quality models on them, evaluates those models, generates
//! synthetic CT phantoms to exercise the whole pipeline, and implements the
//! aggregation logic used to monitor a fleet of sites from privacy-preserving
//! per-site summaries.

pub mod case;
pub mod eval;
pub mod features;
pub mod federation;
pub mod models;
pub mod nifti;
pub mod resample;
pub mod synth;
pub mod volume;

pub use case::{extract_case_files, CaseError, LungMode};
pub use features::{extract_features, FeatureVector};
pub use volume::{Dims, Mask, Spacing, Volume};
