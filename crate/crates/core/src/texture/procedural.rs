use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{ConditioningPatch, PatchKey, Provenance, TexturePatch, TextureProvider};
use crate::filter::gaussian_blur;
use crate::stage_model::N_STAGES;

/// Stage-dependent texture statistics.
///
/// `granularity` is the blur width (px) applied to the white noise,
/// `contrast` the log-scale amplitude of the resulting modulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProceduralParams {
    pub granularity: [f64; N_STAGES],
    pub contrast: [f64; N_STAGES],
}

impl Default for ProceduralParams {
    fn default() -> Self {
        ProceduralParams {
            granularity: [2.0, 1.2, 1.0, 1.5, 1.2, 1.5],
            contrast: [0.12, 0.30, 0.40, 0.25, 0.30, 0.22],
        }
    }
}

fn foreground_mean(values: &Array2<f64>, mask: &Array2<bool>) -> f64 {
    let (sum, n) =
        Zip::from(values).and(mask).fold(
            (0.0, 0usize),
            |(s, n), &v, &m| if m { (s + v, n + 1) } else { (s, n) },
        );
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn saturated_mean(plateau: &Array2<f64>, mask: &Array2<bool>, scale: f64) -> f64 {
    foreground_mean(&plateau.mapv(|v| (scale * v).min(1.0)), mask)
}

/// Smoothed white noise modulating a constant plateau, rescaled so the
/// foreground mean equals the conditioned intensity.
///
/// The noise channel of the conditioning is the only randomness, so the
/// output is a pure function of `(cond, params)`. Below saturation the
/// scaling is linear in the target; when bright pixels clip at 1 the scale
/// is found by bisection so the clipped mean still hits the target.
pub fn procedural_texture(cond: &ConditioningPatch, params: &ProceduralParams) -> TexturePatch {
    let mask = cond.support();
    let target = cond.mean_intensity;
    let zero = || {
        TexturePatch::new(Array2::zeros(mask.raw_dim()), Provenance::Procedural)
            .expect("zero patch is valid")
    };
    if target <= 0.0 || !mask.iter().any(|&m| m) {
        return zero();
    }
    let s = cond.stage.index();

    let white = cond.noise_channel.mapv(|u| (u - 0.5) * 12f64.sqrt());
    let smooth = gaussian_blur(&white, params.granularity[s]);
    let mu = foreground_mean(&smooth, &mask);
    let var = foreground_mean(&smooth.mapv(|v| (v - mu).powi(2)), &mask);
    let sd = var.sqrt();
    let contrast = params.contrast[s];
    let plateau = Zip::from(&smooth).and(&mask).map_collect(|&v, &m| {
        if !m {
            0.0
        } else if sd > 1e-12 {
            (contrast * (v - mu) / sd).exp()
        } else {
            1.0
        }
    });

    let mean_plateau = foreground_mean(&plateau, &mask);
    let max_plateau = plateau.iter().copied().fold(0.0, f64::max);
    let mut scale = target / mean_plateau;
    if scale * max_plateau > 1.0 {
        let min_plateau =
            Zip::from(&plateau).and(&mask).fold(
                f64::INFINITY,
                |acc, &v, &m| if m { acc.min(v) } else { acc },
            );
        let (mut lo, mut hi) = (scale, 1.0 / min_plateau);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if saturated_mean(&plateau, &mask, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scale = 0.5 * (lo + hi);
    }
    let image = plateau.mapv(|v| (scale * v).clamp(0.0, 1.0));
    TexturePatch::new(image, Provenance::Procedural).expect("values clamped to [0, 1]")
}

/// Default provider: textures every request procedurally.
#[derive(Debug, Clone, Default)]
pub struct ProceduralProvider {
    pub params: ProceduralParams,
}

impl TextureProvider for ProceduralProvider {
    fn texture(&self, _key: PatchKey, cond: &ConditioningPatch) -> TexturePatch {
        procedural_texture(cond, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{make_conditioning, PATCH_SIZE};
    use super::*;
    use crate::rng::{substream, Stream};
    use crate::stage_model::StageLabel;

    fn ellipse() -> Array2<bool> {
        Array2::from_shape_fn((PATCH_SIZE, PATCH_SIZE), |(r, c)| {
            ((c as f64 - 48.0) / 14.0).powi(2) + ((r as f64 - 48.0) / 22.0).powi(2) <= 1.0
        })
    }

    fn fg_stats(img: &Array2<f64>, mask: &Array2<bool>) -> (f64, f64) {
        let m = foreground_mean(img, mask);
        let v = foreground_mean(&img.mapv(|x| (x - m).powi(2)), mask);
        (m, v.sqrt())
    }

    fn cond(stage: StageLabel, c: f64, seed: u64) -> ConditioningPatch {
        make_conditioning(
            &ellipse(),
            stage,
            c,
            &mut substream(seed, Stream::Texture, &[]),
        )
        .unwrap()
    }

    #[test]
    fn zero_target_gives_zero_patch() {
        let p = procedural_texture(
            &cond(StageLabel::PROPHASE, 0.0, 1),
            &ProceduralParams::default(),
        );
        assert!(p.image().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn foreground_mean_matches_target() {
        let params = ProceduralParams::default();
        let mask = ellipse();
        for stage in StageLabel::ALL {
            for c in [0.05, 0.3, 0.6, 0.9, 1.0] {
                let p = procedural_texture(&cond(stage, c, 3), &params);
                let (m, _) = fg_stats(p.image(), &mask);
                assert!((m - c).abs() <= 0.02, "stage {stage} c={c}: {m}");
                assert!(Zip::from(p.image()).and(&mask).all(|&v, &k| k || v == 0.0));
            }
        }
    }

    #[test]
    fn doubling_target_doubles_mean() {
        let params = ProceduralParams::default();
        let mask = ellipse();
        for stage in StageLabel::ALL {
            let (a, _) = fg_stats(
                procedural_texture(&cond(stage, 0.2, 5), &params).image(),
                &mask,
            );
            let (b, _) = fg_stats(
                procedural_texture(&cond(stage, 0.4, 5), &params).image(),
                &mask,
            );
            assert!((b / a - 2.0).abs() <= 0.1, "stage {stage}: {a} -> {b}");
        }
    }

    #[test]
    fn stage_changes_texture_contrast() {
        let params = ProceduralParams::default();
        let mask = ellipse();
        let c = 0.5;
        for seed in 0..10 {
            let (_, sd1) = fg_stats(
                procedural_texture(&cond(StageLabel::INTERPHASE, c, seed), &params).image(),
                &mask,
            );
            let (_, sd3) = fg_stats(
                procedural_texture(&cond(StageLabel::PROMETAPHASE, c, seed), &params).image(),
                &mask,
            );
            let margin = 0.5 * (params.contrast[2] - params.contrast[0]) * c;
            assert!(sd3 - sd1 >= margin, "seed {seed}: {sd1} vs {sd3}");
        }
    }

    #[test]
    fn deterministic_given_conditioning() {
        let params = ProceduralParams::default();
        let a = procedural_texture(&cond(StageLabel::ANAPHASE, 0.4, 9), &params);
        let b = procedural_texture(&cond(StageLabel::ANAPHASE, 0.4, 9), &params);
        assert_eq!(a, b);
    }
}
