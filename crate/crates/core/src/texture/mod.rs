//! Texture synthesis for single-cell patches.
//!
//! A texture provider receives a three-channel [`ConditioningPatch`]
//! (stage label, target mean intensity, uniform noise) and returns a
//! [`TexturePatch`]. The built-in provider is procedural; patches produced
//! by an external conditional GAN can be loaded from a patch directory.

mod conditioning;
mod external;
mod procedural;

pub use conditioning::{make_conditioning, ConditioningPatch};
pub use external::{load_external_patches, ExternalProvider, PATCH_INDEX_FILE};
pub use procedural::{procedural_texture, ProceduralParams, ProceduralProvider};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stage_model::{StageLabel, N_STAGES};

/// Side length of conditioning and texture patches.
pub const PATCH_SIZE: usize = 96;

/// Identifies the patch of one cell in one frame (`"<cell>_<frame>"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchKey {
    pub cell: u32,
    pub frame: u32,
}

impl fmt::Display for PatchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.cell, self.frame)
    }
}

impl FromStr for PatchKey {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (cell, frame) = s
            .split_once('_')
            .ok_or_else(|| format!("key '{s}' is not of the form cellID_frame"))?;
        Ok(PatchKey {
            cell: cell.parse().map_err(|_| format!("bad cell id in '{s}'"))?,
            frame: frame.parse().map_err(|_| format!("bad frame in '{s}'"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Procedural,
    External,
}

/// A 96×96 texture with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TexturePatch {
    image: Array2<f64>,
    provenance: Provenance,
}

impl TexturePatch {
    pub fn new(image: Array2<f64>, provenance: Provenance) -> Result<Self> {
        if image.dim() != (PATCH_SIZE, PATCH_SIZE) {
            return Err(Error::InvalidInput(format!(
                "texture patch must be {PATCH_SIZE}×{PATCH_SIZE}, got {:?}",
                image.dim()
            )));
        }
        if let Some(v) = image.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "texture value {v} outside [0, 1]"
            )));
        }
        Ok(TexturePatch { image, provenance })
    }

    pub fn image(&self) -> &Array2<f64> {
        &self.image
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Anything that can texture a conditioning patch.
pub trait TextureProvider: Send + Sync {
    fn texture(&self, key: PatchKey, cond: &ConditioningPatch) -> TexturePatch;
}

/// Per-stage mean intensity and spread, in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntensityTable", into = "RawIntensityTable")]
pub struct StageIntensityTable {
    mean: [f64; N_STAGES],
    std: [f64; N_STAGES],
}

#[derive(Serialize, Deserialize)]
struct RawIntensityTable {
    mean: [f64; N_STAGES],
    std: [f64; N_STAGES],
}

impl TryFrom<RawIntensityTable> for StageIntensityTable {
    type Error = Error;
    fn try_from(raw: RawIntensityTable) -> Result<Self> {
        StageIntensityTable::new(raw.mean, raw.std)
    }
}

impl From<StageIntensityTable> for RawIntensityTable {
    fn from(t: StageIntensityTable) -> Self {
        RawIntensityTable {
            mean: t.mean,
            std: t.std,
        }
    }
}

impl StageIntensityTable {
    pub fn new(mean: [f64; N_STAGES], std: [f64; N_STAGES]) -> Result<Self> {
        if mean.iter().any(|m| !(*m > 0.0 && *m <= 1.0)) {
            return Err(Error::InvalidConfig(
                "stage mean intensities must lie in (0, 1]".into(),
            ));
        }
        if std.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig(
                "stage intensity std must be nonnegative".into(),
            ));
        }
        Ok(StageIntensityTable { mean, std })
    }

    pub fn mean(&self, stage: StageLabel) -> f64 {
        self.mean[stage.index()]
    }

    pub fn std(&self, stage: StageLabel) -> f64 {
        self.std[stage.index()]
    }
}

impl Default for StageIntensityTable {
    /// Placeholder values, NOT measured from microscopy data. Condensed
    /// chromatin (prometaphase to anaphase) is brighter than interphase.
    fn default() -> Self {
        StageIntensityTable {
            mean: [0.35, 0.42, 0.50, 0.55, 0.55, 0.45],
            std: [0.03, 0.03, 0.04, 0.04, 0.04, 0.03],
        }
    }
}
