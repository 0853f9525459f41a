//! Dense per-pixel displacement fields for free-form deformation.

use crate::error::{Error, Result};
use crate::exec;
use crate::image::Image;

/// Per-pixel 2-D displacement vectors `(dx, dy)` in pixels, row-major, at the
/// resolution of the image they deform. Warping is backward:
/// `output(x, y) = input(x + dx(x, y), y + dy(x, y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl DisplacementField {
    /// Zero field.
    pub fn new(width: usize, height: usize) -> DisplacementField {
        DisplacementField {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn from_components(
        width: usize,
        height: usize,
        dx: Vec<f64>,
        dy: Vec<f64>,
    ) -> Result<DisplacementField> {
        if dx.len() != width * height || dy.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "component length {}/{} does not match {}x{}",
                dx.len(),
                dy.len(),
                width,
                height
            )));
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "displacement components must be finite".into(),
            ));
        }
        Ok(DisplacementField {
            width,
            height,
            dx,
            dy,
        })
    }

    /// Build by evaluating `f(x, y) -> (dx, dy)` at every pixel.
    pub fn from_fn<F: Fn(usize, usize) -> (f64, f64) + Sync>(
        width: usize,
        height: usize,
        f: F,
    ) -> DisplacementField {
        let mut field = DisplacementField::new(width, height);
        let (dx, dy) = (&mut field.dx, &mut field.dy);
        let rows: Vec<(usize, &mut [f64], &mut [f64])> = dx
            .chunks_mut(width)
            .zip(dy.chunks_mut(width))
            .enumerate()
            .map(|(y, (rx, ry))| (y, rx, ry))
            .collect();
        exec_rows(rows, |y, rx, ry| {
            for x in 0..rx.len() {
                let (vx, vy) = f(x, y);
                rx[x] = vx;
                ry[x] = vy;
            }
        });
        field
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: (f64, f64)) {
        let i = y * self.width + x;
        self.dx[i] = v.0;
        self.dy[i] = v.1;
    }

    /// Bilinear sample of the vector at real coordinates, clamp-to-edge.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> (f64, f64) {
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = x - x0;
        let ty = y - y0;
        let ix = x0 as i64;
        let iy = y0 as i64;
        let idx = |xx: i64, yy: i64| {
            let cx = xx.clamp(0, self.width as i64 - 1) as usize;
            let cy = yy.clamp(0, self.height as i64 - 1) as usize;
            cy * self.width + cx
        };
        let (i00, i10, i01, i11) = (
            idx(ix, iy),
            idx(ix + 1, iy),
            idx(ix, iy + 1),
            idx(ix + 1, iy + 1),
        );
        let lerp2 = |c: &[f64]| {
            let top = c[i00] + (c[i10] - c[i00]) * tx;
            let bot = c[i01] + (c[i11] - c[i01]) * tx;
            top + (bot - top) * ty
        };
        (lerp2(&self.dx), lerp2(&self.dy))
    }

    /// Largest vector magnitude in the field.
    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(&x, &y)| x.hypot(y))
            .fold(0.0, f64::max)
    }

    /// Add `other` into this field componentwise.
    pub fn add_assign(&mut self, other: &DisplacementField) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        for (a, b) in self.dx.iter_mut().zip(&other.dx) {
            *a += b;
        }
        for (a, b) in self.dy.iter_mut().zip(&other.dy) {
            *a += b;
        }
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn exec_rows<F>(rows: Vec<(usize, &mut [f64], &mut [f64])>, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    use rayon::prelude::*;
    rows.into_par_iter().for_each(|(y, rx, ry)| f(y, rx, ry));
}

#[cfg(not(feature = "parallel"))]
fn exec_rows<F>(rows: Vec<(usize, &mut [f64], &mut [f64])>, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    for (y, rx, ry) in rows {
        f(y, rx, ry);
    }
}

/// Backward-warp `img` by `field`: `output(x,y) = img(x + dx, y + dy)` with
/// bicubic sampling. Field and image dimensions must match.
pub fn warp_field(img: &Image, field: &DisplacementField) -> Result<Image> {
    if img.width() != field.width || img.height() != field.height {
        return Err(Error::DimensionMismatch(
            field.width,
            field.height,
            img.width(),
            img.height(),
        ));
    }
    let w = img.width();
    let mut out = Image::new(w, img.height());
    let (dx, dy) = (&field.dx, &field.dy);
    exec::for_each_row(out.data_mut(), w, |y, row| {
        let base = y * w;
        for (x, v) in row.iter_mut().enumerate() {
            let i = base + x;
            *v = img.sample_bicubic(x as f64 + dx[i], y as f64 + dy[i]);
        }
    });
    Ok(out)
}

/// Upsample a field to roughly double resolution: bilinear resampling of each
/// component to the target grid, then all magnitudes doubled because pixel
/// coordinates double across the scale change. Target dims must lie in
/// `[2*dim, 2*dim + 1]` per axis.
pub fn upsample_field2(
    field: &DisplacementField,
    target_w: usize,
    target_h: usize,
) -> Result<DisplacementField> {
    let ok = |src: usize, dst: usize| dst >= 2 * src && dst <= 2 * src + 1;
    if !ok(field.width, target_w) || !ok(field.height, target_h) {
        return Err(Error::BadTargetDims {
            src_w: field.width,
            src_h: field.height,
            target_w,
            target_h,
        });
    }
    let sx = grid_ratio(field.width, target_w);
    let sy = grid_ratio(field.height, target_h);
    Ok(DisplacementField::from_fn(target_w, target_h, |x, y| {
        let (dx, dy) = field.sample_bilinear(x as f64 * sx, y as f64 * sy);
        (2.0 * dx, 2.0 * dy)
    }))
}

/// Endpoint-aligned grid mapping factor from target index to source index.
fn grid_ratio(src: usize, dst: usize) -> f64 {
    if dst <= 1 || src <= 1 {
        0.0
    } else {
        (src as f64 - 1.0) / (dst as f64 - 1.0)
    }
}

/// Numerically invert a displacement field by fixed-point iteration:
/// `g(q) = -f(q + g(q))`. For smooth fields with Lipschitz constant below 1
/// this converges to the backward field matching the forward point map
/// `q -> q + f(q)`.
pub fn invert_field(field: &DisplacementField, iterations: usize) -> DisplacementField {
    let mut inv = DisplacementField::from_fn(field.width, field.height, |x, y| {
        let (dx, dy) = field.get(x, y);
        (-dx, -dy)
    });
    for _ in 0..iterations {
        inv = DisplacementField::from_fn(field.width, field.height, |x, y| {
            let (gx, gy) = inv.get(x, y);
            let (fx, fy) = field.sample_bilinear(x as f64 + gx, y as f64 + gy);
            (-fx, -fy)
        });
    }
    inv
}
