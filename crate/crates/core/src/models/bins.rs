use serde::{Deserialize, Serialize};

pub const N_BINS: usize = 5;

/// Equal-width Dice bin boundaries; the 0.6 edge is the failure threshold.
pub const BIN_EDGES: [f64; N_BINS + 1] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Masks with Dice strictly below this are failed segmentations.
pub const FAILED_DICE: f64 = 0.6;

/// One of five Dice quality intervals; bin `i` covers `[0.2 i, 0.2 (i + 1))`
/// and bin 4 also takes Dice 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityBin(u8);

impl QualityBin {
    pub const ALL: [QualityBin; N_BINS] = [
        QualityBin(0),
        QualityBin(1),
        QualityBin(2),
        QualityBin(3),
        QualityBin(4),
    ];

    pub const fn new(index: u8) -> Option<Self> {
        if (index as usize) < N_BINS {
            Some(Self(index))
        } else {
            None
        }
    }

    /// Compares against the edge table rather than dividing, so 0.6 lands
    /// in bin 3 exactly. Values outside `[0, 1]` clamp to the end bins.
    pub fn from_dice(dice: f64) -> Self {
        let above = BIN_EDGES[1..N_BINS].iter().filter(|&&e| dice >= e).count();
        Self(above as u8)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub fn midpoint(self) -> f64 {
        0.5 * (BIN_EDGES[self.index()] + BIN_EDGES[self.index() + 1])
    }

    /// Bins 0..=2 lie entirely below [`FAILED_DICE`].
    pub const fn is_failed(self) -> bool {
        self.0 <= 2
    }
}

impl TryFrom<u8> for QualityBin {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v).ok_or_else(|| format!("quality bin {v} out of range 0..=4"))
    }
}

impl From<QualityBin> for u8 {
    fn from(b: QualityBin) -> u8 {
        b.0
    }
}

impl std::fmt::Display for QualityBin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
