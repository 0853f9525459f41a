//! Landmark-based accuracy evaluation and checkerboard fusion views.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::image::Image;
use crate::transform::SimilarityParams;

/// Ordered control points in real pixel coordinates. Paired sets are compared
/// index by index, so ordering is significant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    pub points: Vec<(f64, f64)>,
}

impl LandmarkSet {
    pub fn new(points: Vec<(f64, f64)>) -> LandmarkSet {
        LandmarkSet { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Registration accuracy summary. `error_mm` follows the evaluation protocol
/// of taking the square root of the mean squared pixel distance and applying
/// the millimeters-per-pixel scale factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_pair_distances: Vec<f64>,
    /// Mean of squared distances, pixels^2.
    pub mse_px2: f64,
    /// sqrt(mse_px2), pixels.
    pub rms_px: f64,
    /// rms_px * scale_factor, millimeters.
    pub error_mm: f64,
    pub scale_factor: f64,
}

/// Map landmarks through a similarity transform, then optionally add the
/// bilinearly interpolated displacement at each mapped location. The rotation
/// center must be supplied by the caller since bare point sets carry no image
/// dimensions.
pub fn map_landmarks(
    points: &LandmarkSet,
    p: &SimilarityParams,
    center: (f64, f64),
    field: Option<&DisplacementField>,
) -> Result<LandmarkSet> {
    let mut out = Vec::with_capacity(points.len());
    for &(x, y) in &points.points {
        let (mut mx, mut my) = p.apply(x, y, center.0, center.1);
        if let Some(f) = field {
            if mx < 0.0 || my < 0.0 || mx > (f.width() - 1) as f64 || my > (f.height() - 1) as f64 {
                return Err(Error::OutOfField {
                    x: mx,
                    y: my,
                    w: f.width(),
                    h: f.height(),
                });
            }
            let (dx, dy) = f.sample_bilinear(mx, my);
            mx += dx;
            my += dy;
        }
        out.push((mx, my));
    }
    Ok(LandmarkSet::new(out))
}

/// Euclidean distance statistics between paired landmark sets: per-pair
/// distances, their mean square in pixels^2, the RMS in pixels, and the RMS
/// scaled to millimeters.
pub fn landmark_error(a: &LandmarkSet, b: &LandmarkSet, scale_factor: f64) -> Result<EvalReport> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptySets);
    }
    let per_pair_distances: Vec<f64> = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(&(ax, ay), &(bx, by))| (ax - bx).hypot(ay - by))
        .collect();
    let mse_px2 =
        per_pair_distances.iter().map(|d| d * d).sum::<f64>() / per_pair_distances.len() as f64;
    let rms_px = mse_px2.sqrt();
    Ok(EvalReport {
        per_pair_distances,
        mse_px2,
        rms_px,
        error_mm: rms_px * scale_factor,
        scale_factor,
    })
}

/// Report built directly from a known mean squared pixel error, for feeding
/// published per-subject values through the same mm conversion.
pub fn report_from_mse_px2(mse_px2: f64, scale_factor: f64) -> EvalReport {
    let rms_px = mse_px2.sqrt();
    EvalReport {
        per_pair_distances: Vec::new(),
        mse_px2,
        rms_px,
        error_mm: rms_px * scale_factor,
        scale_factor,
    }
}

/// Alternate tiles from `a` and `b`: output pixel comes from `a` when
/// `floor(x/tile) + floor(y/tile)` is even.
pub fn checkerboard(a: &Image, b: &Image, tile: usize) -> Result<Image> {
    a.same_dims(b)?;
    if tile < 1 {
        return Err(Error::InvalidParameter("tile must be >= 1".into()));
    }
    Ok(Image::from_fn(a.width(), a.height(), |x, y| {
        if (x / tile + y / tile).is_multiple_of(2) {
            a.get(x, y)
        } else {
            b.get(x, y)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map_preserves_points() {
        let pts = LandmarkSet::new(vec![(1.5, 2.25), (10.0, 20.0)]);
        let out = map_landmarks(&pts, &SimilarityParams::identity(), (8.0, 8.0), None).unwrap();
        assert_eq!(out, pts);
    }

    #[test]
    fn translation_shifts_every_point() {
        let pts = LandmarkSet::new(vec![(0.0, 0.0), (3.25, 7.5)]);
        let p = SimilarityParams::new(3.0, 4.0, 0.0, 1.0);
        let out = map_landmarks(&pts, &p, (5.0, 5.0), None).unwrap();
        assert_eq!(out.points[0], (3.0, 4.0));
        assert_eq!(out.points[1], (6.25, 11.5));
    }

    #[test]
    fn field_adds_analytic_ramp_value() {
        // linear ramp dx = 0.1 x + 0.05 y, dy = -0.2; bilinear interpolation
        // reproduces linear fields exactly
        let field =
            DisplacementField::from_fn(16, 16, |x, y| (0.1 * x as f64 + 0.05 * y as f64, -0.2));
        let pts = LandmarkSet::new(vec![(4.3, 7.8)]);
        let out = map_landmarks(
            &pts,
            &SimilarityParams::identity(),
            (8.0, 8.0),
            Some(&field),
        )
        .unwrap();
        let want_dx = 0.1 * 4.3 + 0.05 * 7.8;
        assert!((out.points[0].0 - (4.3 + want_dx)).abs() < 1e-12);
        assert!((out.points[0].1 - (7.8 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn out_of_field_rejected() {
        let field = DisplacementField::new(8, 8);
        let pts = LandmarkSet::new(vec![(20.0, 2.0)]);
        let err = map_landmarks(
            &pts,
            &SimilarityParams::identity(),
            (4.0, 4.0),
            Some(&field),
        );
        assert!(matches!(err, Err(Error::OutOfField { .. })));
    }

    #[test]
    fn landmark_error_345() {
        let a = LandmarkSet::new(vec![(0.0, 0.0)]);
        let b = LandmarkSet::new(vec![(3.0, 4.0)]);
        let rep = landmark_error(&a, &b, 1.2).unwrap();
        assert_eq!(rep.per_pair_distances, vec![5.0]);
        assert_eq!(rep.mse_px2, 25.0);
        assert_eq!(rep.rms_px, 5.0);
        assert!((rep.error_mm - 6.0).abs() < 1e-12);
    }

    #[test]
    fn landmark_error_identical_and_errors() {
        let a = LandmarkSet::new(vec![(1.0, 1.0), (2.0, 5.0)]);
        let rep = landmark_error(&a, &a, 1.2).unwrap();
        assert_eq!(rep.mse_px2, 0.0);
        assert_eq!(rep.error_mm, 0.0);
        let b = LandmarkSet::new(vec![(0.0, 0.0)]);
        assert!(matches!(
            landmark_error(&a, &b, 1.2),
            Err(Error::LengthMismatch(2, 1))
        ));
        let empty = LandmarkSet::default();
        assert!(matches!(
            landmark_error(&empty, &empty, 1.2),
            Err(Error::EmptySets)
        ));
    }

    #[test]
    fn landmark_error_symmetric_and_scales_linearly() {
        let a = LandmarkSet::new(vec![(0.0, 1.0), (5.5, 2.0), (9.0, 9.0)]);
        let b = LandmarkSet::new(vec![(1.0, 2.5), (4.0, 2.0), (9.25, 8.0)]);
        let ab = landmark_error(&a, &b, 1.2).unwrap();
        let ba = landmark_error(&b, &a, 1.2).unwrap();
        assert_eq!(ab.mse_px2, ba.mse_px2);
        let doubled = landmark_error(&a, &b, 2.4).unwrap();
        assert!((doubled.error_mm - 2.0 * ab.error_mm).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_tiles() {
        let a = Image::from_fn(4, 4, |_, _| 1.0);
        let b = Image::from_fn(4, 4, |_, _| 0.0);
        let out = checkerboard(&a, &b, 2).unwrap();
        // quadrants a,b / b,a
        assert_eq!(out.get(0, 0), 1.0);
        assert_eq!(out.get(2, 0), 0.0);
        assert_eq!(out.get(0, 2), 0.0);
        assert_eq!(out.get(2, 2), 1.0);

        // tile larger than the image: single even tile, everything from a
        let big = checkerboard(&a, &b, 8).unwrap();
        assert_eq!(big, a);
        // a == b: output == a
        let same = checkerboard(&a, &a, 2).unwrap();
        assert_eq!(same, a);
    }

    #[test]
    fn checkerboard_partition_is_exact() {
        let a = Image::from_fn(9, 7, |x, y| (x * 10 + y) as f64);
        let b = Image::from_fn(9, 7, |x, y| -((x * 10 + y) as f64) - 1.0);
        let ab = checkerboard(&a, &b, 3).unwrap();
        let ba = checkerboard(&b, &a, 3).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let from_a = ab.get(x, y) == a.get(x, y);
                let swapped_from_b = ba.get(x, y) == b.get(x, y);
                assert_eq!(from_a, swapped_from_b);
                assert!(ab.get(x, y) == a.get(x, y) || ab.get(x, y) == b.get(x, y));
            }
        }
    }

    #[test]
    fn published_mse_values_convert_to_millimeters() {
        // fine-stage per-subject mean squared pixel errors through the
        // sqrt-then-scale conversion at 1.2 mm/px
        let reports: Vec<EvalReport> = [4.19, 4.27, 6.97]
            .iter()
            .map(|&v| report_from_mse_px2(v, 1.2))
            .collect();
        let mm: Vec<f64> = reports.iter().map(|r| r.error_mm).collect();
        assert!((mm[0] - 2.46).abs() < 0.01);
        assert!((mm[1] - 2.48).abs() < 0.01);
        assert!((mm[2] - 3.17).abs() < 0.01);
        let mean = mm.iter().sum::<f64>() / 3.0;
        assert!((mean - 2.70).abs() < 0.05);
    }
}
