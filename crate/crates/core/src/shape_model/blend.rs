use std::f64::consts::{PI, SQRT_2};

use nalgebra::DVector;

use super::{sample_shape, LandmarkShape, ShapeModelSet, ShapeSampleParams, SHAPE_DIM};
use crate::error::{Error, Result};
use crate::stage_model::{StageLabel, StageRun, StageSequence, N_STAGES};

/// Kernels are ignored beyond this many widths from their centre.
const KERNEL_SUPPORT: f64 = 4.0;

/// Convex per-stage mixing weights for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionWeights {
    weights: [f64; N_STAGES],
}

impl TransitionWeights {
    pub fn one_hot(stage: StageLabel) -> Self {
        let mut weights = [0.0; N_STAGES];
        weights[stage.index()] = 1.0;
        TransitionWeights { weights }
    }

    /// Normalizes nonnegative masses to unit sum.
    pub fn from_masses(masses: [f64; N_STAGES]) -> Option<Self> {
        let total: f64 = masses.iter().sum();
        if total.is_nan() || total <= 0.0 || masses.iter().any(|m| *m < 0.0) {
            return None;
        }
        Some(TransitionWeights {
            weights: masses.map(|m| m / total),
        })
    }

    pub fn get(&self, stage: StageLabel) -> f64 {
        self.weights[stage.index()]
    }

    pub fn as_array(&self) -> &[f64; N_STAGES] {
        &self.weights
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Unnormalized Gaussian kernel of width `sigma` centred on `mu`.
pub fn transition_kernel(t: f64, mu: f64, sigma: f64) -> f64 {
    let var = sigma * sigma;
    (-(t - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}

/// Normalized mixing weight of every run at frame `t`.
///
/// Each run boundary places a kernel at the first frame of the new run,
/// with width equal to the length of the run being left. The kernel is the
/// rate at which weight crosses that boundary, so the share that has
/// crossed boundary `k` by frame `t` is `p_k = Φ((t − μ_k)/σ_k)` (exactly 0
/// or 1 beyond ±4σ). Run `k` then holds `p_0⋯p_{k−1}·(1 − p_k)`: the split
/// is even exactly at an isolated boundary, and a frame no kernel reaches
/// belongs entirely to its own run.
pub fn run_weights(runs: &[StageRun], t: usize) -> Vec<f64> {
    let n = runs.len();
    assert!(
        StageSequence::run_index_at(runs, t).is_some(),
        "frame lies inside the sequence"
    );
    let mut w = vec![0.0; n];
    let mut carried = 1.0;
    let tf = t as f64;
    for k in 0..n - 1 {
        let mu = runs[k + 1].start as f64;
        let sigma = runs[k].len as f64;
        let z = (tf - mu) / sigma;
        let crossed = if z < -KERNEL_SUPPORT {
            0.0
        } else if z > KERNEL_SUPPORT {
            1.0
        } else {
            normal_cdf(z)
        };
        w[k] = carried * (1.0 - crossed);
        carried *= crossed;
    }
    w[n - 1] = carried;
    w
}

/// Sums run weights per stage.
pub fn stage_weights_from_runs(runs: &[StageRun], run_w: &[f64]) -> TransitionWeights {
    let mut masses = [0.0; N_STAGES];
    for (run, w) in runs.iter().zip(run_w) {
        masses[run.stage.index()] += w;
    }
    TransitionWeights::from_masses(masses).expect("run weights are a convex combination")
}

pub fn transition_weights(seq: &StageSequence, t: usize) -> TransitionWeights {
    assert!(t < seq.len(), "frame {t} outside sequence of {}", seq.len());
    let runs = seq.runs();
    let w = run_weights(&runs, t);
    stage_weights_from_runs(&runs, &w)
}

/// Weighted sum of per-stage sampled shapes.
///
/// `params[s]` holds the coefficients for stage `s`. Stages without a model
/// are dropped and the remaining weights renormalized; if nothing remains,
/// the nearest stage that has a model is used alone. `n_e` caps the number
/// of modes per stage (`None` = all).
pub fn blend_shape(
    models: &ShapeModelSet,
    weights: &TransitionWeights,
    params: &[ShapeSampleParams; N_STAGES],
    n_e: Option<usize>,
) -> Result<LandmarkShape> {
    let mut masses = [0.0; N_STAGES];
    for s in models.stages() {
        masses[s.index()] = weights.get(s);
    }
    let effective = match TransitionWeights::from_masses(masses) {
        Some(w) => w,
        None => {
            let dominant = StageLabel::ALL
                .into_iter()
                .max_by(|a, b| weights.get(*a).total_cmp(&weights.get(*b)))
                .expect("six stages");
            let fallback = models
                .nearest_available(dominant)
                .ok_or(Error::NoShapeModels)?;
            TransitionWeights::one_hot(fallback)
        }
    };

    let mut acc = DVector::zeros(SHAPE_DIM);
    for s in StageLabel::ALL {
        let w = effective.get(s);
        if w == 0.0 {
            continue;
        }
        let model = models.get(s).expect("weight only on available stages");
        let p = &params[s.index()];
        let modes = n_e
            .unwrap_or(usize::MAX)
            .min(model.n_modes())
            .min(p.b.len());
        let shape = sample_shape(model, p, modes)?;
        acc.axpy(w, shape.as_vector(), 1.0);
    }
    Ok(LandmarkShape::from_vector(acc))
}
