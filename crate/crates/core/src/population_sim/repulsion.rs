use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;

use super::motion::clamp_to_canvas;
use crate::config::RepulsionParams;

/// A cell as seen by the repulsion step: centre and ellipse semi-axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub position: [f64; 2],
    pub r_major: f64,
    pub r_minor: f64,
}

/// Accumulated displacement applied to the pair `(i, j)`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrection {
    pub i: usize,
    pub j: usize,
    pub delta_i: [f64; 2],
    pub delta_j: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepulsionOutcome {
    pub positions: Vec<[f64; 2]>,
    pub pairs: Vec<PairCorrection>,
    pub sweeps: usize,
}

/// Hard lower bound on centre distance: half the summed minor semi-axes.
pub fn min_separation(a: &Body, b: &Body) -> f64 {
    0.5 * (a.r_minor + b.r_minor)
}

fn unit<R: Rng + ?Sized>(from: [f64; 2], to: [f64; 2], rng: &mut R) -> ([f64; 2], f64) {
    let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
    let d = dx.hypot(dy);
    if d > 1e-12 {
        ([dx / d, dy / d], d)
    } else {
        let a = TAU * rng.random::<f64>();
        ([a.cos(), a.sin()], d)
    }
}

/// Pushes overlapping cells apart.
///
/// Each sweep visits every pair whose centre distance `d` is below the sum
/// of major semi-axes `S_M` and moves the two cells apart along the line of
/// centres by equal and opposite amounts of
/// `gain·(1 − d/S_M)² + inner_gain·(1 − d/S_N)²₊` (`S_N`: summed minor
/// semi-axes). Sweeps repeat until the largest move drops below the
/// tolerance or `max_sweeps` is reached. A final projection then separates
/// any pair still closer than [`min_separation`]. Coincident centres are
/// split along a random direction. With `canvas`, positions are clamped
/// after every update.
pub fn resolve_repulsion<R: Rng + ?Sized>(
    bodies: &[Body],
    params: &RepulsionParams,
    canvas: Option<[usize; 2]>,
    rng: &mut R,
) -> RepulsionOutcome {
    let n = bodies.len();
    let mut pos: Vec<[f64; 2]> = bodies.iter().map(|b| b.position).collect();
    let mut pairs: BTreeMap<(usize, usize), ([f64; 2], [f64; 2])> = BTreeMap::new();
    let clamp = |p: [f64; 2]| canvas.map_or(p, |c| clamp_to_canvas(p, c));
    let mut record = |i: usize, j: usize, di: [f64; 2], dj: [f64; 2]| {
        let e = pairs.entry((i, j)).or_insert(([0.0; 2], [0.0; 2]));
        e.0 = [e.0[0] + di[0], e.0[1] + di[1]];
        e.1 = [e.1[0] + dj[0], e.1[1] + dj[1]];
    };

    let mut sweeps = 0;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        let mut moves = vec![[0.0; 2]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s_major = bodies[i].r_major + bodies[j].r_major;
                let s_minor = bodies[i].r_minor + bodies[j].r_minor;
                let (u, d) = unit(pos[i], pos[j], rng);
                if d >= s_major {
                    continue;
                }
                let mut m = params.gain * (1.0 - d / s_major).powi(2);
                if d < s_minor {
                    m += params.inner_gain * (1.0 - d / s_minor).powi(2);
                }
                let dj = [m * u[0], m * u[1]];
                let di = [-dj[0], -dj[1]];
                moves[i] = [moves[i][0] + di[0], moves[i][1] + di[1]];
                moves[j] = [moves[j][0] + dj[0], moves[j][1] + dj[1]];
                record(i, j, di, dj);
            }
        }
        let mut largest: f64 = 0.0;
        for (p, m) in pos.iter_mut().zip(&moves) {
            largest = largest.max(m[0].hypot(m[1]));
            *p = clamp([p[0] + m[0], p[1] + m[1]]);
        }
        if largest < params.tolerance {
            break;
        }
    }

    for _ in 0..200 {
        let mut clean = true;
        for i in 0..n {
            for j in i + 1..n {
                let target = min_separation(&bodies[i], &bodies[j]);
                let (u, d) = unit(pos[i], pos[j], rng);
                if d >= target {
                    continue;
                }
                clean = false;
                let half = 0.5 * (target - d) + 1e-6;
                let dj = [half * u[0], half * u[1]];
                let di = [-dj[0], -dj[1]];
                pos[i] = clamp([pos[i][0] + di[0], pos[i][1] + di[1]]);
                pos[j] = clamp([pos[j][0] + dj[0], pos[j][1] + dj[1]]);
                record(i, j, di, dj);
            }
        }
        if clean {
            break;
        }
    }

    RepulsionOutcome {
        positions: pos,
        pairs: pairs
            .into_iter()
            .map(|((i, j), (delta_i, delta_j))| PairCorrection {
                i,
                j,
                delta_i,
                delta_j,
            })
            .collect(),
        sweeps,
    }
}
