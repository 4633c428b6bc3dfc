//! Small image filters shared by texture synthesis and acquisition.

use ndarray::{Array2, Axis};

/// Sampled 1D Gaussian truncated at ±4σ and normalized to unit sum.
///
/// Returns `[1.0]` for `sigma <= 0`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let two_var = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / two_var).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn convolve_axis(image: &Array2<f64>, kernel: &[f64], axis: Axis) -> Array2<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = Array2::zeros(image.raw_dim());
    for (src, mut dst) in image.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        let n = src.len();
        for (i, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                acc += w * src[reflect(i as i64 + j as i64 - radius, n)];
            }
            *d = acc;
        }
    }
    out
}

/// Separable Gaussian blur with reflective borders.
pub fn gaussian_blur(image: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 || image.is_empty() {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let tmp = convolve_axis(image, &kernel, Axis(1));
    convolve_axis(&tmp, &kernel, Axis(0))
}
