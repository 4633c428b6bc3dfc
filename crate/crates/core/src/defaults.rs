//! Built-in models used when no estimated models are supplied.
//!
//! None of these values are measured from microscopy data. The shape models
//! are built from a small synthetic corpus of perturbed ellipses whose size
//! and elongation vary by stage; they exist so the whole pipeline runs out
//! of the box and so its properties can be tested.

use std::f64::consts::PI;
use std::sync::OnceLock;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::rng::{substream, Stream};
use crate::shape_model::{build_shape_model, extract_landmarks, ShapeModelSet};
use crate::stage_model::{StageLabel, StageTransitionModel, N_STAGES};
use crate::texture::PATCH_SIZE;

/// Placeholder cell-cycle graph: interphase → prophase → prometaphase →
/// metaphase → anaphase → telophase → interphase, with a rare skip of
/// prophase. Mean cycle length is roughly 60 frames.
pub fn default_transition_model() -> StageTransitionModel {
    let transition = [
        [0.96, 0.03, 0.01, 0.0, 0.0, 0.0],
        [0.0, 0.6, 0.4, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.7, 0.3, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.75, 0.25, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.6, 0.4],
        [0.25, 0.0, 0.0, 0.0, 0.0, 0.75],
    ];
    let min_duration = [10, 2, 2, 3, 2, 3];
    let max_duration = [Some(80), Some(6), Some(8), Some(12), Some(5), Some(10)];
    StageTransitionModel::new(transition, min_duration, max_duration)
        .expect("default model is valid")
}

/// `(major, minor)` semi-axes in pixels of the corpus shapes per stage.
pub const CORPUS_SEMI_AXES: [(f64, f64); N_STAGES] = [
    (16.0, 12.5),
    (15.0, 13.0),
    (13.0, 10.5),
    (14.0, 6.5),
    (9.0, 6.0),
    (9.5, 7.5),
];

pub const CORPUS_SHAPES_PER_STAGE: usize = 40;
const CORPUS_SEED: u64 = 0x5EED_C0DE;

/// One synthetic training mask: a randomly rotated ellipse with jittered
/// axes and low-order radial harmonics, centred in a 96×96 snippet.
pub fn corpus_mask<R: Rng + ?Sized>(stage: StageLabel, rng: &mut R) -> Array2<bool> {
    let (a0, b0) = CORPUS_SEMI_AXES[stage.index()];
    let jitter = Normal::new(1.0, 0.06).expect("valid normal");
    let a = a0 * jitter.sample(rng);
    let b = b0 * jitter.sample(rng);
    let harmonics: Vec<(f64, f64)> = (2..=4)
        .map(|_| (0.04 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>()))
        .collect();
    let rotation = 2.0 * PI * rng.random::<f64>();
    let centre = (PATCH_SIZE as f64 - 1.0) / 2.0;
    Array2::from_shape_fn((PATCH_SIZE, PATCH_SIZE), |(r, c)| {
        let (dx, dy) = (c as f64 - centre, r as f64 - centre);
        let (s, co) = rotation.sin_cos();
        let (u, v) = (co * dx + s * dy, -s * dx + co * dy);
        let phi = u.atan2(v);
        let base = a * b / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt();
        let bump: f64 = harmonics
            .iter()
            .enumerate()
            .map(|(i, (amp, ph))| amp * ((i as f64 + 2.0) * phi + ph).cos())
            .sum();
        u.hypot(v) <= base * (1.0 + bump)
    })
}

/// Deterministic corpus of `(stage, mask)` pairs.
pub fn synthetic_corpus(seed: u64, per_stage: usize) -> Vec<(StageLabel, Array2<bool>)> {
    StageLabel::ALL
        .iter()
        .flat_map(|&stage| {
            let mut rng = substream(seed, Stream::Corpus, &[stage.value() as u64]);
            (0..per_stage)
                .map(|_| (stage, corpus_mask(stage, &mut rng)))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Builds per-stage models from a synthetic corpus.
pub fn build_corpus_models(seed: u64, per_stage: usize) -> Result<ShapeModelSet> {
    let corpus = synthetic_corpus(seed, per_stage);
    let models = StageLabel::ALL
        .iter()
        .map(|&stage| {
            let shapes = corpus
                .iter()
                .filter(|(s, _)| *s == stage)
                .map(|(_, m)| extract_landmarks(m))
                .collect::<Result<Vec<_>>>()?;
            build_shape_model(&shapes, stage)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShapeModelSet::new(models))
}

/// Shape models from the built-in corpus (built once per process).
pub fn default_shape_models() -> &'static ShapeModelSet {
    static MODELS: OnceLock<ShapeModelSet> = OnceLock::new();
    MODELS.get_or_init(|| {
        build_corpus_models(CORPUS_SEED, CORPUS_SHAPES_PER_STAGE)
            .expect("built-in corpus yields valid models")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stage_model::sample_stage_sequence;

    #[test]
    fn default_models_cover_all_stages() {
        let set = default_shape_models();
        for s in StageLabel::ALL {
            let m = set.get(s).unwrap();
            assert_eq!(m.n_train, CORPUS_SHAPES_PER_STAGE);
            assert!(m.n_modes() > 0 && m.n_modes() < CORPUS_SHAPES_PER_STAGE);
            let (a, b) = m.mean_shape().polygon_moments().semi_axes();
            let (ea, eb) = CORPUS_SEMI_AXES[s.index()];
            assert!(
                (a - ea).abs() < 1.5 && (b - eb).abs() < 1.5,
                "stage {s}: {a} {b}"
            );
        }
    }

    #[test]
    fn default_model_cycles() {
        let model = default_transition_model();
        let mut rng = substream(0, Stream::Stage, &[]);
        let seq =
            sample_stage_sequence(&model, 400, &mut rng, Some(StageLabel::INTERPHASE)).unwrap();
        assert!(crate::stage_model::find_division_events(&seq).len() >= 3);
    }
}
