use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Position (`[x, y]`, px) and orientation (rad) of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub position: [f64; 2],
    pub orientation: f64,
}

/// Increments drawn for one frame, before clamping to the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionStep {
    pub dx: f64,
    pub dy: f64,
    pub rotation: f64,
}

fn normal_draw<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> f64 {
    if variance > 0.0 {
        Normal::new(0.0, variance.sqrt())
            .expect("finite variance")
            .sample(rng)
    } else {
        0.0
    }
}

/// Brownian step: `dx, dy ~ N(0, variance)`, `δ ~ N(0, rotation_variance)`
/// (radians). The position is clamped to `[0, w−1] × [0, h−1]`.
pub fn step_motion<R: Rng + ?Sized>(
    state: &mut CellState,
    variance: f64,
    rotation_variance: f64,
    canvas: [usize; 2],
    rng: &mut R,
) -> MotionStep {
    let step = MotionStep {
        dx: normal_draw(variance, rng),
        dy: normal_draw(variance, rng),
        rotation: normal_draw(rotation_variance, rng),
    };
    state.position = clamp_to_canvas(
        [state.position[0] + step.dx, state.position[1] + step.dy],
        canvas,
    );
    state.orientation += step.rotation;
    step
}

pub fn clamp_to_canvas(p: [f64; 2], canvas: [usize; 2]) -> [f64; 2] {
    [
        p[0].clamp(0.0, canvas[0] as f64 - 1.0),
        p[1].clamp(0.0, canvas[1] as f64 - 1.0),
    ]
}

/// Daughter placements at a division: `±d·n̂` from the mother, where `n̂` is
/// the mother's minor-axis direction, i.e. perpendicular to her major
/// axis. Landmark shapes have their major axis along y, so with
/// orientation θ the minor axis is `(cos θ, sin θ)`. Both daughters
/// inherit the mother's orientation.
pub fn divide(mother: &CellState, distance: f64) -> (CellState, CellState) {
    let (s, c) = mother.orientation.sin_cos();
    let [x, y] = mother.position;
    let a = CellState {
        position: [x + distance * c, y + distance * s],
        orientation: mother.orientation,
    };
    let b = CellState {
        position: [x - distance * c, y - distance * s],
        orientation: mother.orientation,
    };
    (a, b)
}

/// Uniform founder placement inside the margin, random orientation.
pub fn place_founder<R: Rng + ?Sized>(canvas: [usize; 2], margin: f64, rng: &mut R) -> CellState {
    let x = margin + rng.random::<f64>() * (canvas[0] as f64 - 1.0 - 2.0 * margin);
    let y = margin + rng.random::<f64>() * (canvas[1] as f64 - 1.0 - 2.0 * margin);
    CellState {
        position: [x, y],
        orientation: TAU * rng.random::<f64>(),
    }
}
