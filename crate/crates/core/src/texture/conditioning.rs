use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use super::PATCH_SIZE;
use crate::error::{Error, Result};
use crate::imageio;
use crate::stage_model::StageLabel;

/// Stage label value is stored as `label * STAGE_FILE_SCALE` in 16-bit files.
pub(crate) const STAGE_FILE_SCALE: u16 = 1000;

/// Three-channel input of a texture provider.
///
/// The stage channel holds the stage label value (1..=6) on the cell and 0
/// elsewhere; the intensity channel holds the target mean intensity on the
/// same support; the noise channel is i.i.d. uniform on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningPatch {
    pub stage: StageLabel,
    pub mean_intensity: f64,
    pub stage_channel: Array2<f64>,
    pub intensity_channel: Array2<f64>,
    pub noise_channel: Array2<f64>,
}

pub fn make_conditioning<R: Rng + ?Sized>(
    mask: &Array2<bool>,
    stage: StageLabel,
    mean_intensity: f64,
    rng: &mut R,
) -> Result<ConditioningPatch> {
    if mask.dim() != (PATCH_SIZE, PATCH_SIZE) {
        return Err(Error::InvalidInput(format!(
            "conditioning mask must be {PATCH_SIZE}×{PATCH_SIZE}, got {:?}",
            mask.dim()
        )));
    }
    if !mask.iter().any(|&v| v) {
        return Err(Error::EmptyMask);
    }
    if !(0.0..=1.0).contains(&mean_intensity) {
        return Err(Error::InvalidInput(format!(
            "mean intensity {mean_intensity} outside [0, 1]"
        )));
    }
    let label = stage.value() as f64;
    let noise = Array2::from_shape_simple_fn(mask.raw_dim(), || rng.random::<f64>());
    Ok(ConditioningPatch {
        stage,
        mean_intensity,
        stage_channel: mask.mapv(|v| if v { label } else { 0.0 }),
        intensity_channel: mask.mapv(|v| if v { mean_intensity } else { 0.0 }),
        noise_channel: noise,
    })
}

impl ConditioningPatch {
    /// Foreground support shared by the stage and intensity channels.
    pub fn support(&self) -> Array2<bool> {
        self.stage_channel.mapv(|v| v > 0.0)
    }

    /// Stage channel scaled to [0, 1] (label / 6).
    pub fn normalized_stage_channel(&self) -> Array2<f64> {
        self.stage_channel.mapv(|v| v / 6.0)
    }

    /// Writes `<key>_stage.png`, `<key>_intensity.png` and `<key>_noise.png`.
    pub fn write_triplet(&self, dir: &Path, key: &str) -> Result<()> {
        let stage = self
            .stage_channel
            .mapv(|v| (v.round() as u16) * STAGE_FILE_SCALE);
        imageio::write_png16(&dir.join(format!("{key}_stage.png")), &stage)?;
        imageio::write_png16(
            &dir.join(format!("{key}_intensity.png")),
            &imageio::to_u16(&self.intensity_channel),
        )?;
        imageio::write_png16(
            &dir.join(format!("{key}_noise.png")),
            &imageio::to_u16(&self.noise_channel),
        )
    }

    /// Reads a triplet written by [`ConditioningPatch::write_triplet`].
    /// Intensity and noise come back quantized to 16 bits.
    pub fn read_triplet(dir: &Path, key: &str) -> Result<Self> {
        let stage_raw = imageio::read_png_raw(&dir.join(format!("{key}_stage.png")))?;
        let intensity = imageio::from_u16(&imageio::read_png_raw(
            &dir.join(format!("{key}_intensity.png")),
        )?);
        let noise = imageio::from_u16(&imageio::read_png_raw(
            &dir.join(format!("{key}_noise.png")),
        )?);
        let stage_channel = stage_raw.mapv(|v| (v / STAGE_FILE_SCALE) as f64);
        let label = stage_channel
            .iter()
            .copied()
            .find(|&v| v > 0.0)
            .ok_or(Error::EmptyMask)?;
        let stage = StageLabel::new(label as i64)?;
        let mean_intensity = intensity
            .iter()
            .zip(stage_channel.iter())
            .find(|(_, &s)| s > 0.0)
            .map(|(&i, _)| i)
            .unwrap_or(0.0);
        Ok(ConditioningPatch {
            stage,
            mean_intensity,
            stage_channel,
            intensity_channel: intensity,
            noise_channel: noise,
        })
    }
}
