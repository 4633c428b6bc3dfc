use std::cmp::Reverse;
use std::collections::BinaryHeap;

use image::imageops::{resize, FilterType};
use image::{GrayImage, ImageBuffer, Luma};
use imageproc::contrast::otsu_level;
use imageproc::distance_transform::euclidean_squared_distance_transform;
use ndarray::Array2;

use crate::shape_model::connected_components;
use crate::texture::PATCH_SIZE;

/// Markers are the parts of each blob whose distance to the background
/// exceeds this fraction of the blob's largest distance.
pub const MARKER_FRACTION: f64 = 0.6;

/// Bilinear resampling to 96×96 (no-op when already that size).
pub fn normalize_snippet(image: &Array2<f64>) -> Array2<f64> {
    let (h, w) = image.dim();
    if (h, w) == (PATCH_SIZE, PATCH_SIZE) {
        return image.clone();
    }
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([image[[y as usize, x as usize]] as f32])
    });
    let out = resize(
        &buf,
        PATCH_SIZE as u32,
        PATCH_SIZE as u32,
        FilterType::Triangle,
    );
    Array2::from_shape_fn((PATCH_SIZE, PATCH_SIZE), |(r, c)| {
        out.get_pixel(c as u32, r as u32)[0] as f64
    })
}

/// Otsu foreground of an image in [0, 1] (levels quantized to 8 bits).
pub fn otsu_mask(image: &Array2<f64>) -> Array2<bool> {
    let (h, w) = image.dim();
    let quant = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let gray = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([quant(image[[y as usize, x as usize]])])
    });
    let level = otsu_level(&gray);
    image.mapv(|v| quant(v) > level)
}

/// Euclidean distance of every foreground pixel to the nearest background
/// pixel (0 on the background).
pub fn distance_to_background(mask: &Array2<bool>) -> Array2<f64> {
    let (h, w) = mask.dim();
    let background = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if mask[[y as usize, x as usize]] {
            0
        } else {
            255
        }])
    });
    if !mask.iter().any(|&m| !m) {
        // no background inside the image: distances to the border instead
        return Array2::from_shape_fn((h, w), |(r, c)| {
            (r.min(h - 1 - r).min(c).min(w - 1 - c) + 1) as f64
        });
    }
    let d2 = euclidean_squared_distance_transform(&background);
    Array2::from_shape_fn((h, w), |(r, c)| d2.get_pixel(c as u32, r as u32)[0].sqrt())
}

/// Seeded watershed of `mask` on the inverted distance transform.
///
/// Returns a label image (0 background) with one region per marker.
pub fn watershed_split(mask: &Array2<bool>) -> Array2<u32> {
    let (h, w) = mask.dim();
    let dist = distance_to_background(mask);
    let (blobs, n_blobs) = connected_components(mask);
    let mut peak = vec![0.0f64; n_blobs + 1];
    for (&b, &d) in blobs.iter().zip(dist.iter()) {
        peak[b as usize] = peak[b as usize].max(d);
    }
    let seeds = Array2::from_shape_fn((h, w), |(r, c)| {
        let b = blobs[[r, c]] as usize;
        b > 0 && dist[[r, c]] >= MARKER_FRACTION * peak[b]
    });
    let (mut labels, _) = connected_components(&seeds);

    // priority flood: highest distance first, ties by insertion order
    let key = |d: f64| (d * 1e6).round() as i64;
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    let mut queued = seeds.clone();
    let push = |heap: &mut BinaryHeap<_>,
                order: &mut u64,
                r: usize,
                c: usize,
                queued: &mut Array2<bool>| {
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (rr, cc) = (r as i64 + dr, c as i64 + dc);
            if rr < 0 || cc < 0 || rr >= h as i64 || cc >= w as i64 {
                continue;
            }
            let (rr, cc) = (rr as usize, cc as usize);
            if mask[[rr, cc]] && !queued[[rr, cc]] {
                queued[[rr, cc]] = true;
                heap.push((key(dist[[rr, cc]]), Reverse(*order), rr, cc, r, c));
                *order += 1;
            }
        }
    };
    for r in 0..h {
        for c in 0..w {
            if seeds[[r, c]] {
                push(&mut heap, &mut order, r, c, &mut queued);
            }
        }
    }
    while let Some((_, _, r, c, pr, pc)) = heap.pop() {
        labels[[r, c]] = labels[[pr, pc]];
        push(&mut heap, &mut order, r, c, &mut queued);
    }
    labels
}

/// Foreground region of the object nearest the snippet centre: the
/// watershed region under the centre pixel, else the one whose centroid
/// is closest to it.
pub fn center_object(image: &Array2<f64>) -> Option<Array2<bool>> {
    let fg = otsu_mask(image);
    let labels = watershed_split(&fg);
    let (h, w) = labels.dim();
    let n = labels.iter().copied().max().unwrap_or(0) as usize;
    if n == 0 {
        return None;
    }
    let centre = [(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0];
    let mut chosen = labels[[h / 2, w / 2]];
    if chosen == 0 {
        let mut acc = vec![(0.0, 0.0, 0usize); n + 1];
        for ((r, c), &l) in labels.indexed_iter() {
            let a = &mut acc[l as usize];
            a.0 += c as f64;
            a.1 += r as f64;
            a.2 += 1;
        }
        chosen = (1..=n).filter(|&l| acc[l].2 > 0).min_by(|&a, &b| {
            let d = |l: usize| {
                let k = acc[l].2 as f64;
                (acc[l].0 / k - centre[0]).hypot(acc[l].1 / k - centre[1])
            };
            d(a).total_cmp(&d(b))
        })? as u32;
    }
    let region = labels.mapv(|l| l == chosen);
    Some(largest_component(&region))
}

/// Keeps the largest 8-connected component (watershed regions can touch
/// themselves only diagonally across another region).
fn largest_component(mask: &Array2<bool>) -> Array2<bool> {
    let (cc, n) = connected_components(mask);
    if n <= 1 {
        return mask.clone();
    }
    let mut sizes = vec![0usize; n + 1];
    cc.iter().for_each(|&l| sizes[l as usize] += 1);
    let best = (1..=n)
        .max_by_key(|&l| (sizes[l], Reverse(l)))
        .expect("n ≥ 2") as u32;
    cc.mapv(|l| l == best)
}

/// Number of distinct nonzero labels.
pub fn count_regions(labels: &Array2<u32>) -> usize {
    let mut seen: Vec<u32> = labels.iter().copied().filter(|&l| l > 0).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}
