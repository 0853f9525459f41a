//! Grayscale image container and bicubic sampling.
//!
//! Intensities are `f64`, row-major, normalized to `[0, 1]` when loaded from
//! 8-bit sources. Sampling outside the grid clamps to the nearest edge pixel,
//! so every sampler is a total function.

use crate::error::{Error, Result};

/// A single-channel 2-D image with row-major `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image.
    pub fn new(width: usize, height: usize) -> Image {
        Image {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Build from a row-major buffer. Fails if the length is wrong or any
    /// value is non-finite.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Image> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "image intensities must be finite".into(),
            ));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    /// Build by evaluating `f(x, y)` at every pixel.
    pub fn from_fn<F: Fn(usize, usize) -> f64 + Sync>(width: usize, height: usize, f: F) -> Image {
        let mut img = Image::new(width, height);
        crate::exec::for_each_row(&mut img.data, width, |y, row| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = f(x, y);
            }
        });
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Intensity at integer pixel `(x, y)`. Panics if out of bounds.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    /// Intensity at `(x, y)` with clamp-to-edge semantics for any integers.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Catmull-Rom bicubic sample at real coordinates, clamp-to-edge at the
    /// borders. Reproduces grid values exactly at integer coordinates and is
    /// exact on linear ramps away from the clamped border.
    pub fn sample_bicubic(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let ix = x0 as i64;
        let iy = y0 as i64;

        let mut col = [0.0f64; 4];
        for (j, c) in col.iter_mut().enumerate() {
            let yy = iy - 1 + j as i64;
            let p0 = self.get_clamped(ix - 1, yy);
            let p1 = self.get_clamped(ix, yy);
            let p2 = self.get_clamped(ix + 1, yy);
            let p3 = self.get_clamped(ix + 2, yy);
            *c = catmull_rom(p0, p1, p2, p3, tx);
        }
        catmull_rom(col[0], col[1], col[2], col[3], ty)
    }

    /// Bilinear sample with clamp-to-edge. Used for displacement fields and
    /// landmark interpolation where overshoot is undesirable.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let ix = x0 as i64;
        let iy = y0 as i64;
        let v00 = self.get_clamped(ix, iy);
        let v10 = self.get_clamped(ix + 1, iy);
        let v01 = self.get_clamped(ix, iy + 1);
        let v11 = self.get_clamped(ix + 1, iy + 1);
        let top = v00 + (v10 - v00) * tx;
        let bot = v01 + (v11 - v01) * tx;
        top + (bot - top) * ty
    }

    /// Extract the sub-image at `(x, y)` with size `w`x`h`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::OutOfBounds {
                x,
                y,
                w,
                h,
                img_w: self.width,
                img_h: self.height,
            });
        }
        let mut out = Image::new(w, h);
        for row in 0..h {
            let src = (y + row) * self.width + x;
            out.data[row * w..(row + 1) * w].copy_from_slice(&self.data[src..src + w]);
        }
        Ok(out)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Rescale intensities by `a*v + b`, without clamping.
    pub fn affine_rescaled(&self, a: f64, b: f64) -> Image {
        let data = self.data.iter().map(|&v| a * v + b).collect();
        Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub(crate) fn same_dims(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Catmull-Rom cubic through `p0..p3` at offset `t` in `[0, 1]` between `p1`
/// and `p2` (interpolating kernel, a = -0.5). Horner form: exact at t = 0 and
/// t = 1, reproduces linear data exactly.
#[inline]
pub(crate) fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    p1 + 0.5
        * t
        * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
}
