use std::f64::consts::TAU;

use ndarray::Array2;

use super::{LandmarkShape, PolygonMoments};

/// Scan-line fill of the landmark polygon after rotation about the shape
/// origin and translation to `position` (`[x, y]` in pixels).
///
/// A pixel is foreground when its centre `(col, row)` lies inside the
/// polygon (even-odd rule, half-open spans). Parts outside the canvas are
/// clipped. Polygons with area below one pixel yield an empty mask.
pub fn rasterize_mask(
    shape: &LandmarkShape,
    width: usize,
    height: usize,
    position: [f64; 2],
    rotation: f64,
) -> Array2<bool> {
    let mut mask = Array2::from_elem((height, width), false);
    let (s, c) = rotation.rem_euclid(TAU).sin_cos();
    let pts: Vec<[f64; 2]> = shape
        .points()
        .map(|[x, y]| [c * x - s * y + position[0], s * x + c * y + position[1]])
        .collect();

    let area = PolygonMoments::of(&pts).area;
    if area < 1.0 {
        log::warn!("degenerate polygon (area {area:.3} px²), rasterized as empty");
        return mask;
    }

    let y_min = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let y_max = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let r0 = y_min.ceil().max(0.0) as i64;
    let r1 = y_max.floor().min(height as f64 - 1.0) as i64;
    let n = pts.len();
    let mut xs = Vec::with_capacity(8);
    for r in r0..=r1 {
        let y = r as f64;
        xs.clear();
        for i in 0..n {
            let [x0, y0] = pts[i];
            let [x1, y1] = pts[(i + 1) % n];
            if (y0 <= y) != (y1 <= y) {
                xs.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let c0 = span[0].ceil().max(0.0) as i64;
            let c1 = (span[1].ceil() as i64 - 1).min(width as i64 - 1);
            for col in c0..=c1 {
                mask[[r as usize, col as usize]] = true;
            }
        }
    }
    mask
}

/// Like [`rasterize_mask`] but writes `label` into a 16-bit label image.
pub fn rasterize(
    shape: &LandmarkShape,
    width: usize,
    height: usize,
    position: [f64; 2],
    rotation: f64,
    label: u16,
) -> Array2<u16> {
    rasterize_mask(shape, width, height, position, rotation).mapv(|v| if v { label } else { 0 })
}
