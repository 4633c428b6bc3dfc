//! Per-stage statistical shape models of nuclei outlines.
//!
//! Shapes are 60 landmarks sampled on rays at 6° steps around the object
//! centre, in a frame where the object's major axis is vertical.

mod blend;
mod landmarks;
mod rasterize;
mod ssm;

pub use blend::{
    blend_shape, run_weights, stage_weights_from_runs, transition_kernel, transition_weights,
    TransitionWeights,
};
pub use landmarks::{connected_components, extract_landmarks, MaskMoments};
pub use rasterize::{rasterize, rasterize_mask};
pub use ssm::{
    build_shape_model, covariance, sample_shape, ShapeModelSet, ShapeSampleParams, StageShapeModel,
};

use nalgebra::DVector;

pub const N_LANDMARKS: usize = 60;
pub const LANDMARK_STEP_DEG: f64 = 6.0;
pub const SHAPE_DIM: usize = 2 * N_LANDMARKS;

/// Direction of landmark `k` in the normalized frame.
pub fn landmark_angle(k: usize) -> f64 {
    (LANDMARK_STEP_DEG * k as f64).to_radians()
}

/// 60 ordered boundary points, flattened as `(x0, y0, ..., x59, y59)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkShape {
    coords: DVector<f64>,
}

impl LandmarkShape {
    pub fn from_vector(coords: DVector<f64>) -> Self {
        assert_eq!(
            coords.len(),
            SHAPE_DIM,
            "a shape has {SHAPE_DIM} coordinates"
        );
        LandmarkShape { coords }
    }

    pub fn from_points(points: &[[f64; 2]]) -> Self {
        assert_eq!(
            points.len(),
            N_LANDMARKS,
            "a shape has {N_LANDMARKS} points"
        );
        Self::from_vector(DVector::from_iterator(
            SHAPE_DIM,
            points.iter().flat_map(|p| [p[0], p[1]]),
        ))
    }

    /// Landmarks at the given radii along the canonical rays.
    pub fn from_radii(radii: &[f64]) -> Self {
        assert_eq!(radii.len(), N_LANDMARKS);
        let pts: Vec<[f64; 2]> = radii
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let a = landmark_angle(k);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        Self::from_points(&pts)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.coords
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        [self.coords[2 * k], self.coords[2 * k + 1]]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..N_LANDMARKS).map(|k| self.point(k))
    }

    /// Mean of the landmark points.
    pub fn centroid(&self) -> [f64; 2] {
        let (sx, sy) = self
            .points()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / N_LANDMARKS as f64, sy / N_LANDMARKS as f64]
    }

    pub fn centered(&self) -> Self {
        let c = self.centroid();
        self.translated(-c[0], -c[1])
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut v = self.coords.clone();
        for k in 0..N_LANDMARKS {
            v[2 * k] += dx;
            v[2 * k + 1] += dy;
        }
        LandmarkShape { coords: v }
    }

    /// Rotates about the origin by `angle` (x toward y).
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let pts: Vec<[f64; 2]> = self
            .points()
            .map(|[x, y]| [c * x - s * y, s * x + c * y])
            .collect();
        Self::from_points(&pts)
    }

    pub fn polygon_moments(&self) -> PolygonMoments {
        PolygonMoments::of(&self.points().collect::<Vec<_>>())
    }

    /// Largest per-landmark Euclidean distance to `other`.
    pub fn max_landmark_distance(&self, other: &LandmarkShape) -> f64 {
        self.points()
            .zip(other.points())
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
    }

    /// Root-mean-square landmark distance to `other`.
    pub fn rms_distance(&self, other: &LandmarkShape) -> f64 {
        let ss: f64 = self
            .points()
            .zip(other.points())
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum();
        (ss / N_LANDMARKS as f64).sqrt()
    }
}

/// Area moments of a simple polygon (Green's theorem).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonMoments {
    /// Unsigned area.
    pub area: f64,
    pub centroid: [f64; 2],
    /// Central second moments normalized by area.
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
}

impl PolygonMoments {
    pub fn of(points: &[[f64; 2]]) -> Self {
        let n = points.len();
        let (mut a2, mut cx, mut cy, mut ixx, mut iyy, mut ixy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let [x0, y0] = points[i];
            let [x1, y1] = points[(i + 1) % n];
            let cross = x0 * y1 - x1 * y0;
            a2 += cross;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
            ixx += (x0 * x0 + x0 * x1 + x1 * x1) * cross;
            iyy += (y0 * y0 + y0 * y1 + y1 * y1) * cross;
            ixy += (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0) * cross;
        }
        let signed = a2 / 2.0;
        if signed.abs() < 1e-12 {
            return PolygonMoments {
                area: 0.0,
                centroid: [0.0, 0.0],
                mu20: 0.0,
                mu02: 0.0,
                mu11: 0.0,
            };
        }
        let cx = cx / (6.0 * signed);
        let cy = cy / (6.0 * signed);
        PolygonMoments {
            area: signed.abs(),
            centroid: [cx, cy],
            mu20: ixx / 12.0 / signed - cx * cx,
            mu02: iyy / 12.0 / signed - cy * cy,
            mu11: ixy / 24.0 / signed - cx * cy,
        }
    }

    /// Eigenvalues of the second-moment matrix, larger first.
    fn principal_moments(&self) -> (f64, f64) {
        let half_trace = (self.mu20 + self.mu02) / 2.0;
        let d = (((self.mu20 - self.mu02) / 2.0).powi(2) + self.mu11 * self.mu11).sqrt();
        (half_trace + d, (half_trace - d).max(0.0))
    }

    /// Semi-axes `(major, minor)` of the ellipse with the same moments.
    pub fn semi_axes(&self) -> (f64, f64) {
        let (l1, l2) = self.principal_moments();
        (2.0 * l1.sqrt(), 2.0 * l2.sqrt())
    }

    /// Angle of the major axis from +x toward +y, in (-π/2, π/2].
    pub fn major_axis_angle(&self) -> f64 {
        0.5 * (2.0 * self.mu11).atan2(self.mu20 - self.mu02)
    }
}
