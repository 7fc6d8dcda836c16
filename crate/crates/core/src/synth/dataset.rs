//! Labeled phantom datasets spanning the quality spectrum.
//!
//! Each case is assigned a target quality bin up front. The builder then
//! draws a phantom and searches corruption kinds and magnitudes until the
//! recomputed Dice lands in that bin, so bin coverage holds by construction.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::dice;
use crate::features::label_components;
use crate::models::{QualityBin, BIN_EDGES, N_BINS};
use crate::nifti;
use crate::synth::corrupt::{Corruption, CorruptionKind};
use crate::synth::phantom::{generate_phantom, PhantomParams};
use crate::synth::SynthError;
use crate::volume::{Mask, Volume};

pub const MANIFEST_VERSION: u32 = 1;
pub const MIN_PER_BIN: usize = 5;
/// Failed masks mostly leak, drift or scatter; a uniformly shrunken mask
/// keeps the intensity, shape and containment of a correct one and is rare.
pub const FAILED_KIND_WEIGHTS: [f64; 6] = [0.1, 1.5, 1.5, 0.5, 1.0, 1.0];
/// Acceptable masks mostly carry boundary errors; spurious outside
/// components are less common.
pub const GOOD_KIND_WEIGHTS: [f64; 6] = [1.0, 1.0, 1.0, 1.0, 0.3, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    /// Equal share of cases per quality bin.
    Uniform,
    /// Mostly good masks: bins 0–2 get `max(5, 8%)` of the cases each, the
    /// rest is split 40/60 between bins 3 and 4.
    SkewedGood,
}

impl Spectrum {
    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::SkewedGood => "skewed_good",
        }
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Spectrum {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(Self::Uniform),
            "skewed_good" => Ok(Self::SkewedGood),
            _ => Err(SynthError::UnknownSpectrum(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Deterministic split: one case in five goes to the test split, keyed on a
/// CRC-32 of the case id.
pub fn split_for(case_id: &str) -> Split {
    if crc32fast::hash(case_id.as_bytes()) % 5 == 0 {
        Split::Test
    } else {
        Split::Train
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomCase {
    pub case_id: String,
    pub image: Volume,
    pub gt_mask: Mask,
    pub lung_mask: Mask,
    pub pred_mask: Mask,
    pub true_dice: f64,
    pub corruption: Corruption,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_cases: usize,
    pub seed: u64,
    pub spectrum: Spectrum,
    /// Base phantom geometry; lesion count and size vary per case.
    pub phantom: PhantomParams,
    pub max_lesions: usize,
    /// Phantoms tried per case before giving up on its target bin.
    pub max_attempts: usize,
    /// Relative preference of each corruption kind for failed target bins
    /// (0–2), in [`CorruptionKind::ALL`] order. Kinds are tried in a weighted
    /// random order until one reaches the target bin.
    pub failed_kind_weights: [f64; 6],
    /// Same for acceptable target bins (3–4).
    pub good_kind_weights: [f64; 6],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_cases: 50,
            seed: 0,
            spectrum: Spectrum::Uniform,
            phantom: PhantomParams::default(),
            max_lesions: 5,
            max_attempts: 20,
            failed_kind_weights: FAILED_KIND_WEIGHTS,
            good_kind_weights: GOOD_KIND_WEIGHTS,
        }
    }
}

/// Number of cases per bin for `n` cases.
pub fn bin_quota(n: usize, spectrum: Spectrum) -> Result<[usize; N_BINS], SynthError> {
    let min = MIN_PER_BIN * N_BINS;
    if n < min {
        return Err(SynthError::TooFewCases { n, min });
    }
    let mut q = [0; N_BINS];
    match spectrum {
        Spectrum::Uniform => {
            for (b, slot) in q.iter_mut().enumerate() {
                *slot = n / N_BINS + usize::from(b >= N_BINS - n % N_BINS);
            }
        }
        Spectrum::SkewedGood => {
            let k = MIN_PER_BIN.max((0.08 * n as f64).round() as usize);
            let rest = n - 3 * k;
            q = [k, k, k, 0, 0];
            q[3] = ((0.4 * rest as f64).round() as usize).max(MIN_PER_BIN);
            q[4] = rest - q[3];
        }
    }
    debug_assert_eq!(q.iter().sum::<usize>(), n);
    Ok(q)
}

fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn magnitude_range(kind: CorruptionKind, gt: &Mask) -> std::ops::RangeInclusive<u32> {
    match kind {
        CorruptionKind::Erode => 1..=6,
        CorruptionKind::Dilate => 1..=8,
        CorruptionKind::Shift => 1..=16,
        CorruptionKind::DropComponents => 1..=label_components(gt).count() as u32,
        CorruptionKind::ScatterOutside => 1..=80,
        CorruptionKind::EraseAll => 0..=0,
    }
}

/// Corruption whose Dice falls in `bin`, closest to `target` among the
/// magnitudes tried. Searches stop once Dice has dropped below the bin.
fn search_kind(
    gt: &Mask,
    lung: &Mask,
    kind: CorruptionKind,
    seed: u64,
    bin: QualityBin,
    target: f64,
) -> Result<Option<(Corruption, Mask, f64)>, SynthError> {
    let lo = BIN_EDGES[bin.index()];
    let mut best: Option<(Corruption, Mask, f64)> = None;
    for magnitude in magnitude_range(kind, gt) {
        let c = Corruption { kind, magnitude, seed };
        let pred = c.apply(gt, lung)?;
        let d = dice(gt, &pred)?;
        if QualityBin::from_dice(d) == bin
            && best.as_ref().is_none_or(|(_, _, bd)| (d - target).abs() < (bd - target).abs())
        {
            best = Some((c, pred, d));
        }
        let monotone = !matches!(kind, CorruptionKind::Shift);
        if monotone && d < lo {
            break;
        }
    }
    Ok(best)
}

/// Weighted random permutation of the kinds usable for `bin` (sampling
/// without replacement via exponential keys). `erase_all` only reaches bin 0.
fn weighted_order(weights: &[f64; 6], bin: QualityBin, rng: &mut ChaCha8Rng) -> Vec<CorruptionKind> {
    let mut keyed: Vec<(f64, CorruptionKind)> = CorruptionKind::ALL
        .into_iter()
        .zip(weights)
        .map(|(k, &w)| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, k)
        })
        .filter(|&(_, k)| k != CorruptionKind::EraseAll || bin.index() == 0)
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    keyed.into_iter().filter(|(key, _)| key.is_finite()).map(|(_, k)| k).collect()
}

fn build_case(index: usize, bin: QualityBin, cfg: &DatasetConfig) -> Result<PhantomCase, SynthError> {
    let case_id = format!("case{index:04}");
    let mut rng = case_rng(cfg.seed, index);
    for _ in 0..cfg.max_attempts {
        let mut params = cfg.phantom.clone();
        params.n_lesions = rng.random_range(1..=cfg.max_lesions.max(1));
        let (rlo, rhi) = cfg.phantom.lesion_radius_range;
        // a per-case size scale covers both a few small spots and larger,
        // more diffuse involvement
        let scale = rng.random_range(0.0..1.0f64);
        let lo = rlo + (rhi - rlo) * 0.5 * scale;
        params.lesion_radius_range = (lo, lo + (rhi - rlo) * 0.5);
        let phantom_seed: u64 = rng.random();
        let corruption_seed: u64 = rng.random();
        let target = rng.random_range(BIN_EDGES[bin.index()]..BIN_EDGES[bin.index() + 1]);
        let phantom = match generate_phantom(phantom_seed, &params) {
            Ok(p) => p,
            Err(SynthError::PlacementFailed { .. }) => continue,
            Err(e) => return Err(e),
        };

        let weights = if bin.is_failed() {
            &cfg.failed_kind_weights
        } else {
            &cfg.good_kind_weights
        };
        let kinds = weighted_order(weights, bin, &mut rng);
        let mut found = None;
        for kind in kinds {
            found = search_kind(&phantom.gt_mask, &phantom.lung_mask, kind, corruption_seed, bin, target)?;
            if found.is_some() {
                break;
            }
        }
        if found.is_none() && bin.index() == N_BINS - 1 {
            let identity = Corruption {
                kind: CorruptionKind::Dilate,
                magnitude: 0,
                seed: corruption_seed,
            };
            found = Some((identity, phantom.gt_mask.clone(), 1.0));
        }
        if let Some((corruption, pred_mask, _)) = found {
            let true_dice = dice(&phantom.gt_mask, &pred_mask)?;
            return Ok(PhantomCase {
                split: split_for(&case_id),
                case_id,
                image: phantom.image,
                gt_mask: phantom.gt_mask,
                lung_mask: phantom.lung_mask,
                pred_mask,
                true_dice,
                corruption,
            });
        }
    }
    Err(SynthError::BinCoverage {
        case_id,
        bin: bin.index() as u8,
        attempts: cfg.max_attempts,
    })
}

/// Target bin of every case, in case order.
pub fn target_bins(cfg: &DatasetConfig) -> Result<Vec<QualityBin>, SynthError> {
    let quota = bin_quota(cfg.n_cases, cfg.spectrum)?;
    let mut bins: Vec<QualityBin> = QualityBin::ALL
        .iter()
        .flat_map(|&b| std::iter::repeat_n(b, quota[b.index()]))
        .collect();
    bins.shuffle(&mut case_rng(cfg.seed, usize::MAX - 1));
    Ok(bins)
}

/// Builds the dataset. Output is a pure function of the config and does not
/// depend on the number of worker threads.
pub fn build_dataset_with(cfg: &DatasetConfig) -> Result<Vec<PhantomCase>, SynthError> {
    cfg.phantom.validate()?;
    for w in [&cfg.failed_kind_weights, &cfg.good_kind_weights] {
        if w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SynthError::InvalidParams(format!("kind weights {w:?}")));
        }
    }
    let bins = target_bins(cfg)?;
    bins.par_iter()
        .enumerate()
        .map(|(i, &b)| build_case(i, b, cfg))
        .collect()
}

pub fn build_dataset(n_cases: usize, seed: u64, spectrum: Spectrum) -> Result<Vec<PhantomCase>, SynthError> {
    build_dataset_with(&DatasetConfig {
        n_cases,
        seed,
        spectrum,
        ..DatasetConfig::default()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub case_id: String,
    /// Paths relative to the manifest's directory.
    pub image: PathBuf,
    pub pred_mask: PathBuf,
    pub lung_mask: PathBuf,
    pub gt_mask: PathBuf,
    pub true_dice: f64,
    pub corruption: Corruption,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_cases: usize,
    pub seed: u64,
    pub spectrum: Spectrum,
    pub cases: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let bytes = fs::read(path)?;
        let m: Self = serde_json::from_slice(&bytes)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(SynthError::ManifestVersion(m.format_version));
        }
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), SynthError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes)?;
        Ok(())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// File names used for case `id`.
pub fn case_files(id: &str) -> [String; 4] {
    [
        format!("{id}_image.nii.gz"),
        format!("{id}_pred.nii.gz"),
        format!("{id}_lung.nii.gz"),
        format!("{id}_gt.nii.gz"),
    ]
}

/// Writes every case as gzipped NIfTI (image as int16 HU, masks as uint8)
/// plus `manifest.json` into `out_dir`.
pub fn write_dataset(cases: &[PhantomCase], cfg: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest, SynthError> {
    fs::create_dir_all(out_dir)?;
    let entries = cases
        .par_iter()
        .map(|c| {
            let [image, pred, lung, gt] = case_files(&c.case_id);
            nifti::write_volume_i16_file(out_dir.join(&image), &c.image)?;
            nifti::write_mask_file(out_dir.join(&pred), &c.pred_mask)?;
            nifti::write_mask_file(out_dir.join(&lung), &c.lung_mask)?;
            nifti::write_mask_file(out_dir.join(&gt), &c.gt_mask)?;
            Ok(ManifestEntry {
                case_id: c.case_id.clone(),
                image: image.into(),
                pred_mask: pred.into(),
                lung_mask: lung.into(),
                gt_mask: gt.into(),
                true_dice: c.true_dice,
                corruption: c.corruption,
                split: c.split,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        n_cases: cases.len(),
        seed: cfg.seed,
        spectrum: cfg.spectrum,
        cases: entries,
    };
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
