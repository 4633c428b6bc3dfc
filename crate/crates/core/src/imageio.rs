//! Grayscale PNG reading and writing on `ndarray` images.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a 16-bit grayscale PNG.
pub fn write_png16(path: &Path, data: &Array2<u16>) -> Result<()> {
    let (rows, cols) = data.dim();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(cols as u32, rows as u32, data.iter().copied().collect())
            .expect("buffer size matches dimensions");
    buf.save(path).map_err(|e| image_err(path, e))
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png8(path: &Path, data: &Array2<u8>) -> Result<()> {
    let (rows, cols) = data.dim();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(cols as u32, rows as u32, data.iter().copied().collect())
            .expect("buffer size matches dimensions");
    buf.save(path).map_err(|e| image_err(path, e))
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| image_err(path, e))
}

/// Reads a grayscale PNG as raw 16-bit values (8-bit inputs are not rescaled).
pub fn read_png_raw(path: &Path) -> Result<Array2<u16>> {
    let img = open(path)?;
    let gray = match img {
        DynamicImage::ImageLuma8(b) => {
            let (w, h) = b.dimensions();
            return Ok(Array2::from_shape_vec(
                (h as usize, w as usize),
                b.into_raw().into_iter().map(u16::from).collect(),
            )
            .expect("dimensions match"));
        }
        other => other.into_luma16(),
    };
    let (w, h) = gray.dimensions();
    Ok(
        Array2::from_shape_vec((h as usize, w as usize), gray.into_raw())
            .expect("dimensions match"),
    )
}

/// Reads an 8- or 16-bit PNG normalized to [0, 1].
pub fn read_png_normalized(path: &Path) -> Result<Array2<f64>> {
    let img = open(path)?;
    let scale = match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgba8(_) => 255.0,
        _ => 65535.0,
    };
    let raw = if scale == 255.0 {
        let g = img.into_luma8();
        let (w, h) = g.dimensions();
        Array2::from_shape_vec(
            (h as usize, w as usize),
            g.into_raw().into_iter().map(u16::from).collect(),
        )
        .expect("dimensions match")
    } else {
        let g = img.into_luma16();
        let (w, h) = g.dimensions();
        Array2::from_shape_vec((h as usize, w as usize), g.into_raw()).expect("dimensions match")
    };
    Ok(raw.mapv(|v| v as f64 / scale))
}

/// Quantizes [0, 1] values to the full 16-bit range.
pub fn to_u16(image: &Array2<f64>) -> Array2<u16> {
    image.mapv(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
}

pub fn from_u16(image: &Array2<u16>) -> Array2<f64> {
    image.mapv(|v| v as f64 / 65535.0)
}
