//! Multi-scale Demons non-rigid registration with Gaussian field
//! regularization and MSE-based stopping.
//!
//! The static image acts as a source of per-pixel forces: each force is the
//! intensity difference times the static gradient, normalized by
//! `diff^2 + |grad|^2` (the squared-denominator form, which bounds every step
//! by half a pixel and never changes sign with the difference). The
//! difference is taken as static minus warped-moving so that accumulating
//! increments into a backward-warp field moves the moving image toward the
//! static one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::field::{upsample_field2, warp_field, DisplacementField};
use crate::filter::{downsample2, smooth_field};
use crate::image::Image;

/// Demons iteration parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemonsConfig {
    /// Pyramid depth; level 0 is full resolution.
    pub levels: usize,
    /// Iteration cap per pyramid level.
    pub iterations_per_level: usize,
    /// Gaussian sigma for displacement-field regularization, pixels.
    pub smooth_sigma: f64,
    /// Stop when the relative MSE decrease falls below this.
    pub convergence_tol: f64,
    /// Force denominator guard; smaller denominators yield a zero force.
    pub epsilon_denominator: f64,
}

impl Default for DemonsConfig {
    fn default() -> Self {
        DemonsConfig {
            levels: 3,
            iterations_per_level: 200,
            smooth_sigma: 1.5,
            convergence_tol: 1e-4,
            epsilon_denominator: 1e-9,
        }
    }
}

impl DemonsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 || self.iterations_per_level < 1 || self.convergence_tol <= 0.0 {
            return Err(Error::InvalidParameter(
                "demons config requires levels >= 1, iterations >= 1, tol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Why a pyramid level stopped iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MseIncrease,
    MaxIterations,
}

/// Full-resolution field plus per-level diagnostics.
#[derive(Debug, Clone)]
pub struct DemonsResult {
    pub field: DisplacementField,
    /// Accepted-iteration MSE values, one trace per level, coarsest first.
    pub mse_trace: Vec<Vec<f64>>,
    pub iterations_used: Vec<usize>,
    pub stop_reason: Vec<StopReason>,
}

/// Mean squared error between two equally-sized images.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_dims(b)?;
    let w = a.width();
    let n = (w * a.height()) as f64;
    if n == 0.0 {
        return Ok(0.0);
    }
    let sum = exec::sum_rows(a.height(), |y| {
        let ra = &a.data()[y * w..(y + 1) * w];
        let rb = &b.data()[y * w..(y + 1) * w];
        ra.iter()
            .zip(rb)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<f64>()
    });
    Ok(sum / n)
}

/// Central-difference gradient of an image, clamp-to-edge.
pub(crate) fn central_gradient(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    exec::for_each_row(&mut gx, w, |y, row| {
        let y = y as i64;
        for (x, v) in row.iter_mut().enumerate() {
            let x = x as i64;
            *v = 0.5 * (img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y));
        }
    });
    exec::for_each_row(&mut gy, w, |y, row| {
        let y = y as i64;
        for (x, v) in row.iter_mut().enumerate() {
            let x = x as i64;
            *v = 0.5 * (img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1));
        }
    });
    (gx, gy)
}

/// One Demons force evaluation. `static_gradient` is computed once from the
/// static image and reused across iterations. Per pixel, with
/// `diff = static - moving_warped`:
///
/// `dV = diff * grad / (diff^2 + |grad|^2)`
///
/// and zero wherever the denominator falls below the guard.
pub fn demons_step(
    static_img: &Image,
    moving_warped: &Image,
    static_gradient: &(Vec<f64>, Vec<f64>),
    cfg: &DemonsConfig,
) -> Result<DisplacementField> {
    static_img.same_dims(moving_warped)?;
    let (w, h) = (static_img.width(), static_img.height());
    let (gx, gy) = static_gradient;
    if gx.len() != w * h || gy.len() != w * h {
        return Err(Error::DimensionMismatch(w, h, gx.len(), gy.len()));
    }
    let stat = static_img.data();
    let mov = moving_warped.data();
    let eps = cfg.epsilon_denominator;
    Ok(DisplacementField::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let diff = stat[i] - mov[i];
        let denom = diff * diff + gx[i] * gx[i] + gy[i] * gy[i];
        if denom < eps {
            (0.0, 0.0)
        } else {
            (diff * gx[i] / denom, diff * gy[i] / denom)
        }
    }))
}

/// Coarse-to-fine Demons registration of a mono-modal pair (typically edge
/// potentials). Returns the backward displacement field that warps `moving`
/// onto `static_img`.
///
/// Each level warps the moving image by the current field, adds the Demons
/// increment, regularizes with a Gaussian, and accepts the iteration only if
/// the MSE did not increase; it stops on convergence (relative MSE decrease
/// below tolerance), on an MSE increase, or at the iteration cap.
pub fn demons_register(
    static_img: &Image,
    moving: &Image,
    cfg: &DemonsConfig,
) -> Result<DemonsResult> {
    cfg.validate()?;
    static_img.same_dims(moving)?;

    // clamp the pyramid so the coarsest level keeps some structure
    let min_dim = static_img.width().min(static_img.height());
    let mut levels = cfg.levels;
    while levels > 1 && (min_dim >> (levels - 1)) < 16 {
        levels -= 1;
    }

    let mut stat_pyr = vec![static_img.clone()];
    let mut mov_pyr = vec![moving.clone()];
    for _ in 1..levels {
        stat_pyr.push(downsample2(stat_pyr.last().unwrap())?);
        mov_pyr.push(downsample2(mov_pyr.last().unwrap())?);
    }

    let coarsest = stat_pyr.len() - 1;
    let mut field = DisplacementField::new(stat_pyr[coarsest].width(), stat_pyr[coarsest].height());
    let mut mse_trace = Vec::new();
    let mut iterations_used = Vec::new();
    let mut stop_reason = Vec::new();

    for level in (0..stat_pyr.len()).rev() {
        let stat = &stat_pyr[level];
        let mov = &mov_pyr[level];
        if field.width() != stat.width() {
            field = upsample_field2(&field, stat.width(), stat.height())?;
        }
        let gradient = central_gradient(stat);

        let mut trace = Vec::new();
        let mut iters = 0;
        let mut reason = StopReason::MaxIterations;
        let mut current_mse = mse(stat, &warp_field(mov, &field)?)?;

        for _ in 0..cfg.iterations_per_level {
            iters += 1;
            let warped = warp_field(mov, &field)?;
            let increment = demons_step(stat, &warped, &gradient, cfg)?;
            let mut candidate = field.clone();
            candidate.add_assign(&increment)?;
            candidate = smooth_field(&candidate, cfg.smooth_sigma)?;
            let candidate_mse = mse(stat, &warp_field(mov, &candidate)?)?;

            if candidate_mse > current_mse {
                reason = StopReason::MseIncrease;
                break;
            }
            let drop = current_mse - candidate_mse;
            field = candidate;
            trace.push(candidate_mse);
            let converged = current_mse == 0.0 || drop <= cfg.convergence_tol * current_mse;
            current_mse = candidate_mse;
            if converged {
                reason = StopReason::Converged;
                break;
            }
        }

        mse_trace.push(trace);
        iterations_used.push(iters);
        stop_reason.push(reason);
    }

    Ok(DemonsResult {
        field,
        mse_trace,
        iterations_used,
        stop_reason,
    })
}
