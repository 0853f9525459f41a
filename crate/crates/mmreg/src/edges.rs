//! Canny edge maps and smoothed edge potentials.
//!
//! Binary edge maps are the modality-invariant surface shared by infrared and
//! white-light images. Because a binary map has zero gradient almost
//! everywhere, it is unusable as a Demons force field directly; smoothing it
//! into a continuous potential restores well-defined gradients while keeping
//! the maxima on the contours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::filter::gaussian_smooth;
use crate::image::Image;

/// Canny and potential parameters. Hysteresis thresholds are fractions of the
/// observed gradient-magnitude maximum, so one config works across modalities
/// with different dynamic ranges.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeConfig {
    /// Pre-smoothing sigma, pixels.
    pub gauss_sigma: f64,
    /// Weak-edge threshold as a fraction of the gradient max.
    pub low_threshold: f64,
    /// Strong-edge threshold as a fraction of the gradient max.
    pub high_threshold: f64,
    /// Smoothing sigma used to turn binary edges into a potential.
    pub potential_sigma: f64,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            gauss_sigma: 1.4,
            low_threshold: 0.1,
            high_threshold: 0.25,
            potential_sigma: 2.0,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.low_threshold > 0.0
            && self.low_threshold < self.high_threshold
            && self.high_threshold <= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "edge thresholds must satisfy 0 < low < high <= 1, got {} / {}",
                self.low_threshold, self.high_threshold
            )));
        }
        if self.gauss_sigma < 0.0 || self.potential_sigma < 0.0 {
            return Err(Error::InvalidSigma(
                self.gauss_sigma.min(self.potential_sigma),
            ));
        }
        Ok(())
    }
}

/// 3x3 Sobel gradients with clamp-to-edge borders.
pub(crate) fn sobel_gradients(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let at = |x: i64, y: i64| img.get_clamped(x, y);
    exec::for_each_row(&mut gx, w, |y, row| {
        let y = y as i64;
        for (x, v) in row.iter_mut().enumerate() {
            let x = x as i64;
            *v = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
        }
    });
    exec::for_each_row(&mut gy, w, |y, row| {
        let y = y as i64;
        for (x, v) in row.iter_mut().enumerate() {
            let x = x as i64;
            *v = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    });
    (gx, gy)
}

/// Canny edge detection: Gaussian smooth, Sobel gradients, 4-sector
/// non-maximum suppression, then double-threshold hysteresis with 8-connected
/// propagation from strong pixels. Returns a strictly binary image.
pub fn canny(img: &Image, cfg: &EdgeConfig) -> Result<Image> {
    cfg.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < 5 || h < 5 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 5,
        });
    }
    let smoothed = gaussian_smooth(img, cfg.gauss_sigma)?;
    let (gx, gy) = sobel_gradients(&smoothed);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(&x, &y)| x.hypot(y)).collect();

    // non-maximum suppression along the quantized gradient direction; ties
    // broken asymmetrically (strict toward the back neighbor) so plateaus of
    // width two thin to a single pixel. Border pixels are never edges.
    let mut thin = vec![0.0f64; w * h];
    exec::for_each_row(&mut thin, w, |y, row| {
        if y == 0 || y == h - 1 {
            return;
        }
        for (x, v) in row.iter_mut().enumerate().take(w - 1).skip(1) {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let (back, fwd) = match sector(gx[i], gy[i]) {
                0 => (mag[i - 1], mag[i + 1]),
                1 => (mag[i - w + 1], mag[i + w - 1]),
                2 => (mag[i - w], mag[i + w]),
                _ => (mag[i - w - 1], mag[i + w + 1]),
            };
            if m > back && m >= fwd {
                *v = m;
            }
        }
    });

    let max_mag = thin.iter().cloned().fold(0.0, f64::max);
    if max_mag == 0.0 {
        return Ok(Image::new(w, h));
    }
    let low = cfg.low_threshold * max_mag;
    let high = cfg.high_threshold * max_mag;

    // hysteresis flood fill, sequential by nature
    let mut out = vec![0.0f64; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..w * h {
        if thin[i] >= high && out[i] == 0.0 {
            out[i] = 1.0;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (x, y) = (j % w, j / w);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let n = ny * w + nx;
                        if out[n] == 0.0 && thin[n] >= low {
                            out[n] = 1.0;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    Image::from_vec(w, h, out)
}

/// Quantize a gradient vector into one of 4 directional sectors:
/// 0 = horizontal neighbors, 1 = diagonal (/), 2 = vertical, 3 = diagonal (\).
fn sector(gx: f64, gy: f64) -> u8 {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        0
    } else if angle < 67.5 {
        3
    } else if angle < 112.5 {
        2
    } else {
        1
    }
}

/// Smooth a binary edge map into a differentiable potential, rescaled so the
/// maximum is 1 (an all-zero map stays zero). Gradients of this surface drive
/// the Demons forces.
pub fn edge_potential(edges: &Image, cfg: &EdgeConfig) -> Result<Image> {
    let smoothed = gaussian_smooth(edges, cfg.potential_sigma)?;
    let (_, max) = smoothed.min_max();
    if max <= 0.0 {
        return Ok(smoothed);
    }
    let data = smoothed.data().iter().map(|&v| v / max).collect();
    Image::from_vec(smoothed.width(), smoothed.height(), data)
}
