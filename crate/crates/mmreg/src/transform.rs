//! Global similarity transform (translation, rotation, isotropic scale) and
//! backward warping.

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::image::Image;

/// 4-parameter similarity transform. The forward map rotates about the image
/// center by `theta`, scales by `scale`, then translates by `(tx, ty)`:
///
/// `T(p) = scale * R(theta) * (p - c) + c + t`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    /// Translation along x, pixels.
    pub tx: f64,
    /// Translation along y, pixels.
    pub ty: f64,
    /// Rotation about the image center, radians.
    pub theta: f64,
    /// Isotropic scale, must stay positive.
    pub scale: f64,
}

impl SimilarityParams {
    pub fn new(tx: f64, ty: f64, theta: f64, scale: f64) -> SimilarityParams {
        assert!(scale > 0.0, "scale must be positive");
        SimilarityParams {
            tx,
            ty,
            theta,
            scale,
        }
    }

    pub fn identity() -> SimilarityParams {
        SimilarityParams {
            tx: 0.0,
            ty: 0.0,
            theta: 0.0,
            scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.tx == 0.0 && self.ty == 0.0 && self.theta == 0.0 && self.scale == 1.0
    }

    /// Forward map of a point, with rotation center `(cx, cy)`.
    pub fn apply(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = x - cx;
        let dy = y - cy;
        (
            self.scale * (c * dx - s * dy) + cx + self.tx,
            self.scale * (s * dx + c * dy) + cy + self.ty,
        )
    }

    /// Inverse map of a point, with rotation center `(cx, cy)`.
    pub fn apply_inverse(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = (x - cx - self.tx) / self.scale;
        let dy = (y - cy - self.ty) / self.scale;
        (c * dx + s * dy + cx, -s * dx + c * dy + cy)
    }

    /// Parameters of the inverse transform (about the same center).
    pub fn inverse(&self) -> SimilarityParams {
        let (s, c) = self.theta.sin_cos();
        let inv_scale = 1.0 / self.scale;
        // t' = -(1/s) R(-theta) t
        SimilarityParams {
            tx: -inv_scale * (c * self.tx + s * self.ty),
            ty: -inv_scale * (-s * self.tx + c * self.ty),
            theta: -self.theta,
            scale: inv_scale,
        }
    }

    /// Center of an image of the given dimensions, the rotation pivot used by
    /// every warp in this crate.
    pub fn center_of(width: usize, height: usize) -> (f64, f64) {
        ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
    }
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams::identity()
    }
}

/// Backward-warp `img` by the similarity transform: each output pixel is
/// bicubic-sampled from the inverse-mapped source position. Output dimensions
/// equal input dimensions.
pub fn warp_similarity(img: &Image, p: &SimilarityParams) -> Image {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = SimilarityParams::center_of(w, h);
    let mut out = Image::new(w, h);
    exec::for_each_row(out.data_mut(), w, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            let (sx, sy) = p.apply_inverse(x as f64, y as f64, cx, cy);
            *v = img.sample_bicubic(sx, sy);
        }
    });
    out
}
