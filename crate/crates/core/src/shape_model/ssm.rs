use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LandmarkShape, SHAPE_DIM};
use crate::error::{Error, Result};
use crate::stage_model::{StageLabel, N_STAGES};

/// Relative cut-off below which eigenvalues count as zero.
const EIGEN_REL_TOL: f64 = 1e-10;
/// Absolute floor, relative to the squared coordinate scale, that absorbs
/// rounding noise when all shapes coincide.
const EIGEN_ABS_TOL: f64 = 1e-24;

/// Mean shape and principal modes of one mitotic stage.
///
/// Only modes with positive eigenvalue are kept, sorted by descending
/// eigenvalue; `eigenvectors` holds them as orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StageShapeModel {
    pub stage: StageLabel,
    pub mean: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub n_train: usize,
}

impl StageShapeModel {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean_shape(&self) -> LandmarkShape {
        LandmarkShape::from_vector(self.mean.clone())
    }

    /// Covariance rebuilt from the retained eigenpairs.
    pub fn reconstructed_covariance(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }

    /// Projects a shape onto the retained modes.
    pub fn project(&self, shape: &LandmarkShape) -> DVector<f64> {
        self.eigenvectors.transpose() * (shape.as_vector() - &self.mean)
    }

    /// Mean plus the given mode coordinates (unscaled).
    pub fn reconstruct(&self, coords: &DVector<f64>) -> LandmarkShape {
        LandmarkShape::from_vector(&self.mean + self.eigenvectors.columns(0, coords.len()) * coords)
    }
}

/// Unbiased sample covariance of flattened landmark vectors.
pub fn covariance(shapes: &[LandmarkShape]) -> DMatrix<f64> {
    let n = shapes.len();
    assert!(n >= 2, "covariance needs at least two shapes");
    let mean = mean_vector(shapes);
    let mut centered = DMatrix::zeros(SHAPE_DIM, n);
    for (j, s) in shapes.iter().enumerate() {
        centered.set_column(j, &(s.as_vector() - &mean));
    }
    &centered * centered.transpose() / (n as f64 - 1.0)
}

fn mean_vector(shapes: &[LandmarkShape]) -> DVector<f64> {
    let mut sum = DVector::zeros(SHAPE_DIM);
    for s in shapes {
        sum += s.as_vector();
    }
    sum / shapes.len() as f64
}

pub fn build_shape_model(shapes: &[LandmarkShape], stage: StageLabel) -> Result<StageShapeModel> {
    if shapes.len() < 2 {
        return Err(Error::InsufficientShapes {
            stage,
            got: shapes.len(),
        });
    }
    let mean = mean_vector(shapes);
    let eig = SymmetricEigen::new(covariance(shapes));

    let mut order: Vec<usize> = (0..SHAPE_DIM).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let scale = (mean.norm_squared() / SHAPE_DIM as f64).max(1.0);
    let cutoff = (EIGEN_REL_TOL * lambda_max).max(EIGEN_ABS_TOL * scale);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > cutoff)
        .collect();

    let mut eigenvectors = DMatrix::zeros(SHAPE_DIM, keep.len());
    let mut eigenvalues = Vec::with_capacity(keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // sign convention: largest-magnitude component positive
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(j, &v);
        eigenvalues.push(eig.eigenvalues[i]);
    }
    Ok(StageShapeModel {
        stage,
        mean,
        eigenvectors,
        eigenvalues,
        n_train: shapes.len(),
    })
}

/// Random coefficients for one stage run: standard-normal `b` per mode
/// and a scalar `epsilon` scaling the whole deviation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeSampleParams {
    pub b: Vec<f64>,
    pub epsilon: f64,
}

impl ShapeSampleParams {
    pub fn zero(n_modes: usize) -> Self {
        ShapeSampleParams {
            b: vec![0.0; n_modes],
            epsilon: 0.0,
        }
    }

    /// `b ~ N(0, 1)` per mode, `epsilon ~ N(0, epsilon_std²)`.
    pub fn draw<R: Rng + ?Sized>(n_modes: usize, epsilon_std: f64, rng: &mut R) -> Self {
        let b = (0..n_modes).map(|_| StandardNormal.sample(rng)).collect();
        let epsilon = if epsilon_std > 0.0 {
            Normal::new(0.0, epsilon_std)
                .expect("finite std")
                .sample(rng)
        } else {
            0.0
        };
        ShapeSampleParams { b, epsilon }
    }
}

/// `mean + Σ_{i<n_e} ε·√λ_i·b_i·e_i`.
pub fn sample_shape(
    model: &StageShapeModel,
    params: &ShapeSampleParams,
    n_e: usize,
) -> Result<LandmarkShape> {
    if n_e > model.n_modes() {
        return Err(Error::TooManyModes {
            requested: n_e,
            available: model.n_modes(),
        });
    }
    if params.b.len() < n_e {
        return Err(Error::InvalidInput(format!(
            "{} coefficients supplied for {n_e} modes",
            params.b.len()
        )));
    }
    let mut v = model.mean.clone();
    for i in 0..n_e {
        let w = params.epsilon * model.eigenvalues[i].sqrt() * params.b[i];
        if w != 0.0 {
            v.axpy(w, &model.eigenvectors.column(i), 1.0);
        }
    }
    Ok(LandmarkShape::from_vector(v))
}

/// Shape models for all stages; stages without enough data are absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeModelSet {
    models: [Option<StageShapeModel>; N_STAGES],
}

impl ShapeModelSet {
    pub fn new(models: Vec<StageShapeModel>) -> Self {
        let mut set = ShapeModelSet::default();
        for m in models {
            let i = m.stage.index();
            set.models[i] = Some(m);
        }
        set
    }

    pub fn get(&self, stage: StageLabel) -> Option<&StageShapeModel> {
        self.models[stage.index()].as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.models.iter().all(Option::is_none)
    }

    pub fn stages(&self) -> impl Iterator<Item = StageLabel> + '_ {
        StageLabel::ALL
            .into_iter()
            .filter(|s| self.models[s.index()].is_some())
    }

    /// Closest stage with a model, preferring earlier stages on ties
    /// (cyclic distance).
    pub fn nearest_available(&self, stage: StageLabel) -> Option<StageLabel> {
        let i = stage.index() as i64;
        (0..N_STAGES as i64)
            .flat_map(|d| [i - d, i + d])
            .map(|j| StageLabel::from_index(j.rem_euclid(N_STAGES as i64) as usize))
            .find(|s| self.get(*s).is_some())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ShapeModelFile {
            format: SSM_FORMAT.into(),
            models: self
                .models
                .iter()
                .flatten()
                .map(|m| (m.stage.value().to_string(), EncodedModel::encode(m)))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ShapeModelFile = serde_json::from_str(text)?;
        if file.format != SSM_FORMAT {
            return Err(Error::InvalidInput(format!(
                "unsupported shape model format '{}'",
                file.format
            )));
        }
        let models = file
            .models
            .into_iter()
            .map(|(key, enc)| {
                let stage = key
                    .parse::<i64>()
                    .map_err(|_| Error::InvalidInput(format!("bad stage key '{key}'")))
                    .and_then(StageLabel::new)?;
                enc.decode(stage)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShapeModelSet::new(models))
    }
}

const SSM_FORMAT: &str = "cellsynth-ssm/1";

#[derive(Serialize, Deserialize)]
struct ShapeModelFile {
    format: String,
    models: BTreeMap<String, EncodedModel>,
}

/// Arrays are base64 of little-endian f64; eigenvectors column by column.
#[derive(Serialize, Deserialize)]
struct EncodedModel {
    n_train: usize,
    n_modes: usize,
    mean: String,
    eigenvalues: String,
    eigenvectors: String,
}

fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| Error::InvalidInput(format!("{what}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::InvalidInput(format!(
            "{what}: expected {expected} values, got {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl EncodedModel {
    fn encode(m: &StageShapeModel) -> Self {
        EncodedModel {
            n_train: m.n_train,
            n_modes: m.n_modes(),
            mean: encode_f64(m.mean.as_slice()),
            eigenvalues: encode_f64(&m.eigenvalues),
            eigenvectors: encode_f64(m.eigenvectors.as_slice()),
        }
    }

    fn decode(self, stage: StageLabel) -> Result<StageShapeModel> {
        let mean = decode_f64(&self.mean, SHAPE_DIM, "mean")?;
        let eigenvalues = decode_f64(&self.eigenvalues, self.n_modes, "eigenvalues")?;
        let vectors = decode_f64(&self.eigenvectors, self.n_modes * SHAPE_DIM, "eigenvectors")?;
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) || eigenvalues.iter().any(|&l| l < 0.0) {
            return Err(Error::InvalidInput(format!(
                "stage {stage}: eigenvalues must be nonnegative and descending"
            )));
        }
        Ok(StageShapeModel {
            stage,
            mean: DVector::from_vec(mean),
            eigenvectors: DMatrix::from_vec(SHAPE_DIM, self.n_modes, vectors),
            eigenvalues,
            n_train: self.n_train,
        })
    }
}
