use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::stage_model::StageLabel;
use crate::texture::StageIntensityTable;

/// Draws a founder's lineage offset `~ N(0, std²)`.
pub fn lineage_offset<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// `clamp(mean[stage] + offset + N(0, std[stage]²), 0, 1)`.
pub fn assign_intensity<R: Rng + ?Sized>(
    stage: StageLabel,
    table: &StageIntensityTable,
    offset: f64,
    rng: &mut R,
) -> f64 {
    let sd = table.std(stage);
    let jitter = if sd > 0.0 {
        Normal::new(0.0, sd).expect("finite std").sample(rng)
    } else {
        0.0
    };
    (table.mean(stage) + offset + jitter).clamp(0.0, 1.0)
}
