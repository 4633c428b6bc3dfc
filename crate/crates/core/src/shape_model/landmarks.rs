use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;

use super::{landmark_angle, LandmarkShape, N_LANDMARKS};
use crate::error::{Error, Result};

const MIN_AREA: usize = 8;
const RAY_STEP: f64 = 0.25;

/// Labels 8-connected foreground components; returns labels and count.
pub fn connected_components(mask: &Array2<bool>) -> (Array2<u32>, usize) {
    let (rows, cols) = mask.dim();
    let mut labels = Array2::<u32>::zeros((rows, cols));
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if !mask[[r, c]] || labels[[r, c]] != 0 {
                continue;
            }
            count += 1;
            labels[[r, c]] = count;
            queue.push_back((r, c));
            while let Some((y, x)) = queue.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= rows as i64 || nx >= cols as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if mask[[ny, nx]] && labels[[ny, nx]] == 0 {
                            labels[[ny, nx]] = count;
                            queue.push_back((ny, nx));
                        }
                    }
                }
            }
        }
    }
    (labels, count as usize)
}

/// Image moments of a binary mask, pixel centres at integer `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskMoments {
    pub area: usize,
    pub centroid: [f64; 2],
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
}

impl MaskMoments {
    pub fn of(mask: &Array2<bool>) -> Option<Self> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for ((r, c), &v) in mask.indexed_iter() {
            if v {
                n += 1;
                sx += c as f64;
                sy += r as f64;
            }
        }
        if n == 0 {
            return None;
        }
        let (cx, cy) = (sx / n as f64, sy / n as f64);
        let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
        for ((r, c), &v) in mask.indexed_iter() {
            if v {
                let (dx, dy) = (c as f64 - cx, r as f64 - cy);
                m20 += dx * dx;
                m02 += dy * dy;
                m11 += dx * dy;
            }
        }
        let nf = n as f64;
        Some(MaskMoments {
            area: n,
            centroid: [cx, cy],
            mu20: m20 / nf,
            mu02: m02 / nf,
            mu11: m11 / nf,
        })
    }

    /// Angle of the major axis from +x toward +y.
    pub fn major_axis_angle(&self) -> f64 {
        0.5 * (2.0 * self.mu11).atan2(self.mu20 - self.mu02)
    }
}

fn bilinear(mask: &Array2<bool>, x: f64, y: f64) -> f64 {
    let (rows, cols) = mask.dim();
    let at = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 {
            0.0
        } else if mask[[r as usize, c as usize]] {
            1.0
        } else {
            0.0
        }
    };
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (c, r) = (x0 as i64, y0 as i64);
    at(r, c) * (1.0 - fx) * (1.0 - fy)
        + at(r, c + 1) * fx * (1.0 - fy)
        + at(r + 1, c) * (1.0 - fx) * fy
        + at(r + 1, c + 1) * fx * fy
}

/// Distance along `dir` from `origin` to the farthest 0.5-crossing of the
/// bilinearly interpolated mask.
fn farthest_crossing(mask: &Array2<bool>, origin: [f64; 2], dir: [f64; 2], t_max: f64) -> f64 {
    let sample = |t: f64| bilinear(mask, origin[0] + t * dir[0], origin[1] + t * dir[1]);
    let steps = (t_max / RAY_STEP).ceil() as usize;
    let mut last_inside = None;
    for i in 0..=steps {
        if sample(i as f64 * RAY_STEP) >= 0.5 {
            last_inside = Some(i);
        }
    }
    let Some(i) = last_inside else {
        return 0.0;
    };
    let (mut lo, mut hi) = (i as f64 * RAY_STEP, (i + 1) as f64 * RAY_STEP);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if sample(mid) >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Normalizes a single-object mask and samples 60 boundary landmarks.
///
/// The object is centred on its centroid and rotated so its major axis is
/// vertical, with the third-order moment along that axis made nonnegative.
/// On each ray the farthest boundary crossing is taken. The returned points
/// are re-centred so their mean is the origin.
pub fn extract_landmarks(mask: &Array2<bool>) -> Result<LandmarkShape> {
    let (_, n_components) = connected_components(mask);
    match n_components {
        0 => return Err(Error::EmptyMask),
        1 => {}
        n => return Err(Error::AmbiguousObject(n)),
    }
    let m = MaskMoments::of(mask).ok_or(Error::EmptyMask)?;
    if m.area < MIN_AREA {
        return Err(Error::ObjectTooSmall(m.area));
    }
    let [cx, cy] = m.centroid;

    // rotation taking the major axis onto +y
    let mut psi = FRAC_PI_2 - m.major_axis_angle();
    let (s, c) = psi.sin_cos();
    let third: f64 = mask
        .indexed_iter()
        .filter(|(_, &v)| v)
        .map(|((r, col), _)| {
            let (dx, dy) = (col as f64 - cx, r as f64 - cy);
            (s * dx + c * dy).powi(3)
        })
        .sum();
    if third < 0.0 {
        psi += std::f64::consts::PI;
    }

    let (rows, cols) = mask.dim();
    let t_max = (rows as f64).hypot(cols as f64);
    let (s, c) = (-psi).sin_cos();
    let radii: Vec<f64> = (0..N_LANDMARKS)
        .map(|k| {
            let (sa, ca) = landmark_angle(k).sin_cos();
            // normalized-frame ray mapped back to image coordinates
            let dir = [c * ca - s * sa, s * ca + c * sa];
            farthest_crossing(mask, [cx, cy], dir, t_max)
        })
        .collect();
    Ok(LandmarkShape::from_radii(&radii).centered())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(size: usize, cx: f64, cy: f64, r: f64) -> Array2<bool> {
        Array2::from_shape_fn((size, size), |(y, x)| {
            (x as f64 - cx).hypot(y as f64 - cy) <= r
        })
    }

    #[test]
    fn disk_landmarks_at_radius() {
        let shape = extract_landmarks(&disk(96, 48.0, 48.0, 20.0)).unwrap();
        assert_eq!(shape.points().count(), 60);
        for p in shape.points() {
            let d = p[0].hypot(p[1]);
            assert!((d - 20.0).abs() <= 0.75, "landmark at distance {d}");
        }
    }

    #[test]
    fn ellipse_landmarks_follow_polar_radius() {
        let (a, b) = (30.0, 15.0);
        let mask = Array2::from_shape_fn((96, 96), |(y, x)| {
            let (dx, dy) = (x as f64 - 48.0, y as f64 - 48.0);
            (dx / a).powi(2) + (dy / b).powi(2) <= 1.0
        });
        let shape = extract_landmarks(&mask).unwrap();
        for (k, p) in shape.points().enumerate() {
            // angle measured from the (vertical) major axis
            let theta = landmark_angle(k) - FRAC_PI_2;
            let expected = a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt();
            let got = p[0].hypot(p[1]);
            assert!((got - expected).abs() <= 1.0, "k={k}: {got} vs {expected}");
        }
    }

    #[test]
    fn landmarks_are_centered() {
        let mask = Array2::from_shape_fn((96, 96), |(y, x)| {
            let (dx, dy) = (x as f64 - 40.0, y as f64 - 50.0);
            (dx / 12.0).powi(2) + (dy / 25.0).powi(2) <= 1.0
                || (dx > 0.0 && dx < 14.0 && dy.abs() < 4.0)
        });
        let c = extract_landmarks(&mask).unwrap().centroid();
        assert!(c[0].abs() < 1e-6 && c[1].abs() < 1e-6);
    }

    #[test]
    fn orientation_uses_third_moment() {
        // a teardrop: wide end at the top of the image in one copy, bottom in the other
        let drop = |flip: bool| {
            Array2::from_shape_fn((96, 96), |(y, x)| {
                let dy = if flip {
                    48.0 - y as f64
                } else {
                    y as f64 - 48.0
                };
                let dx = x as f64 - 48.0;
                let half_width = 14.0 - 0.3 * (dy + 25.0);
                dy.abs() <= 25.0 && dx.abs() <= half_width.max(0.0)
            })
        };
        let a = extract_landmarks(&drop(false)).unwrap();
        let b = extract_landmarks(&drop(true)).unwrap();
        assert!(a.rms_distance(&b) < 1.0, "{}", a.rms_distance(&b));
    }

    #[test]
    fn errors() {
        let empty = Array2::from_elem((32, 32), false);
        assert!(matches!(extract_landmarks(&empty), Err(Error::EmptyMask)));
        let mut two = disk(64, 15.0, 15.0, 6.0);
        two.zip_mut_with(&disk(64, 45.0, 45.0, 6.0), |a, &b| *a |= b);
        assert!(matches!(
            extract_landmarks(&two),
            Err(Error::AmbiguousObject(2))
        ));
        let tiny = disk(32, 10.0, 10.0, 1.0);
        assert!(matches!(
            extract_landmarks(&tiny),
            Err(Error::ObjectTooSmall(5))
        ));
    }
}
