//! Separable Gaussian filtering and pyramid downsampling.

use crate::error::{Error, Result};
use crate::exec;
use crate::field::DisplacementField;
use crate::image::Image;

/// Normalized 1-D Gaussian taps for `sigma > 0`, radius `ceil(3*sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) * inv).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn convolve_rows(src: &[f64], w: usize, taps: &[f64]) -> Vec<f64> {
    let radius = (taps.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    exec::for_each_row(&mut out, w, |y, row| {
        let base = y * w;
        for (x, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += t * src[base + sx];
            }
            *v = acc;
        }
    });
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let radius = (taps.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    exec::for_each_row(&mut out, w, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += t * src[sy * w + x];
            }
            *v = acc;
        }
    });
    out
}

/// Separable Gaussian blur with clamp-to-edge boundaries. `sigma == 0`
/// returns the input unchanged; negative sigma is an error.
pub fn gaussian_smooth(img: &Image, sigma: f64) -> Result<Image> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    if sigma == 0.0 || img.is_empty() {
        return Ok(img.clone());
    }
    let taps = gaussian_kernel(sigma);
    let (w, h) = (img.width(), img.height());
    let tmp = convolve_rows(img.data(), w, &taps);
    let out = convolve_cols(&tmp, w, h, &taps);
    Image::from_vec(w, h, out)
}

/// Gaussian smoothing applied componentwise to a displacement field.
pub fn smooth_field(field: &DisplacementField, sigma: f64) -> Result<DisplacementField> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let taps = gaussian_kernel(sigma);
    let (w, h) = (field.width(), field.height());
    let dx = convolve_cols(&convolve_rows(field.dx(), w, &taps), w, h, &taps);
    let dy = convolve_cols(&convolve_rows(field.dy(), w, &taps), w, h, &taps);
    DisplacementField::from_components(w, h, dx, dy)
}

/// Gaussian pre-smooth (sigma = 1) then 2x decimation. Output dimensions are
/// `floor(dims / 2)`; inputs smaller than 2x2 are rejected.
pub fn downsample2(img: &Image) -> Result<Image> {
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::TooSmall {
            width: img.width(),
            height: img.height(),
            min: 2,
        });
    }
    let smoothed = gaussian_smooth(img, 1.0)?;
    let (w, h) = (img.width() / 2, img.height() / 2);
    Ok(Image::from_fn(w, h, |x, y| smoothed.get(2 * x, 2 * y)))
}
