//! Full registration pipeline: coarse MI alignment, optional ROI crop, edge
//! maps, Demons refinement, and artifact/report output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coarse::{register_coarse, CoarseResult, OptimizerConfig};
use crate::demons::{demons_register, DemonsConfig, DemonsResult, StopReason};
use crate::edges::{canny, edge_potential, EdgeConfig};
use crate::error::{Error, Result};
use crate::eval::{checkerboard, landmark_error, map_landmarks, EvalReport};
use crate::field::{warp_field, DisplacementField};
use crate::io;
use crate::metrics::mutual_information;
use crate::transform::{warp_similarity, SimilarityParams};

/// Whole-pipeline configuration; mirrors the JSON config file. Unknown keys
/// are rejected so typos fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bins: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Optional `[x, y, w, h]` region the fine stage is restricted to.
    pub roi: Option<[usize; 4]>,
    pub scale_factor_mm_per_px: f64,
    /// Checkerboard tile size for overlay artifacts.
    pub overlay_tile: usize,
    /// Landmark CSVs evaluated in the report when both are given.
    pub landmarks_fixed: Option<PathBuf>,
    pub landmarks_moving: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
    pub edges: EdgeConfig,
    pub demons: DemonsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bins: 64,
            n_samples: 20_000,
            seed: 7,
            roi: None,
            scale_factor_mm_per_px: 1.2,
            overlay_tile: 16,
            landmarks_fixed: None,
            landmarks_moving: None,
            optimizer: OptimizerConfig::default(),
            edges: EdgeConfig::default(),
            demons: DemonsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::BadBinCount(self.bins));
        }
        if self.n_samples < 100 {
            return Err(Error::InvalidParameter(format!(
                "n_samples {} below minimum 100",
                self.n_samples
            )));
        }
        if self.overlay_tile < 1 {
            return Err(Error::InvalidParameter("overlay_tile must be >= 1".into()));
        }
        self.optimizer.validate()?;
        self.edges.validate()?;
        self.demons.validate()
    }

    /// Parse from a JSON file.
    pub fn from_json_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::FileNotFound(path.to_path_buf())
            } else {
                Error::IoFailure {
                    path: path.to_path_buf(),
                    source: e,
                }
            }
        })?;
        let cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::ParseError {
            path: path.to_path_buf(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Metrics and diagnostics from one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub mi_before: f64,
    pub mi_after_coarse: f64,
    pub mi_after_fine: f64,
    pub coarse: CoarseResult,
    pub demons: DemonsResult,
    pub landmarks_coarse: Option<EvalReport>,
    pub landmarks_fine: Option<EvalReport>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Embed an ROI-sized field into a full-size zero field at `(ox, oy)`.
fn embed_field(
    roi_field: &DisplacementField,
    full_w: usize,
    full_h: usize,
    ox: usize,
    oy: usize,
) -> DisplacementField {
    let mut full = DisplacementField::new(full_w, full_h);
    for y in 0..roi_field.height() {
        for x in 0..roi_field.width() {
            full.set(x + ox, y + oy, roi_field.get(x, y));
        }
    }
    full
}

/// Run coarse -> ROI -> edges -> Demons end to end, writing artifacts into
/// `out_dir` (created if missing) and returning the collected metrics.
///
/// Artifacts: `coarse_warped.pgm`, `overlay_coarse.pgm`, `edges_fixed.pgm`,
/// `edges_moving.pgm`, `fine_warped.pgm`, `overlay_fine.pgm`, `field.dfld`,
/// `coarse_params.json`, and `report.txt`. Every file is written atomically,
/// and identical inputs with identical seeds produce byte-identical outputs.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    fixed_path: &Path,
    moving_path: &Path,
    out_dir: &Path,
) -> Result<PipelineReport> {
    cfg.validate()?;
    let fixed = stage("load", io::load_image(fixed_path))?;
    let moving = stage("load", io::load_image(moving_path))?;
    stage("load", fixed.same_dims(&moving))?;

    let mi_before = stage("metrics", mutual_information(&fixed, &moving, cfg.bins))?;

    // coarse similarity search
    let coarse = stage(
        "coarse",
        register_coarse(
            &fixed,
            &moving,
            &cfg.optimizer,
            cfg.bins,
            cfg.n_samples,
            cfg.seed,
        ),
    )?;
    let aligned = warp_similarity(&moving, &coarse.params);
    let mi_after_coarse = stage("metrics", mutual_information(&fixed, &aligned, cfg.bins))?;
    stage(
        "coarse",
        io::save_image(&aligned, &out_dir.join("coarse_warped.pgm")),
    )?;
    stage(
        "coarse",
        io::save_image(
            &checkerboard(&fixed, &aligned, cfg.overlay_tile)?,
            &out_dir.join("overlay_coarse.pgm"),
        ),
    )?;
    stage(
        "coarse",
        io::write_atomic(
            &out_dir.join("coarse_params.json"),
            serde_json::to_string_pretty(&coarse.params)
                .expect("params serialize")
                .as_bytes(),
        ),
    )?;

    // optional ROI restriction for the fine stage
    let (fixed_roi, aligned_roi, origin) = match cfg.roi {
        Some([x, y, w, h]) => {
            let f = stage("roi", fixed.crop(x, y, w, h))?;
            let a = stage("roi", aligned.crop(x, y, w, h))?;
            (f, a, (x, y))
        }
        None => (fixed.clone(), aligned.clone(), (0, 0)),
    };

    // shared multimodal surface: edge maps smoothed into potentials
    let edges_fixed = stage("edges", canny(&fixed_roi, &cfg.edges))?;
    let edges_moving = stage("edges", canny(&aligned_roi, &cfg.edges))?;
    stage(
        "edges",
        io::save_image(&edges_fixed, &out_dir.join("edges_fixed.pgm")),
    )?;
    stage(
        "edges",
        io::save_image(&edges_moving, &out_dir.join("edges_moving.pgm")),
    )?;
    let pot_fixed = stage("edges", edge_potential(&edges_fixed, &cfg.edges))?;
    let pot_moving = stage("edges", edge_potential(&edges_moving, &cfg.edges))?;

    // Demons on the potentials
    let demons = stage(
        "demons",
        demons_register(&pot_fixed, &pot_moving, &cfg.demons),
    )?;
    let field = if cfg.roi.is_some() {
        embed_field(
            &demons.field,
            fixed.width(),
            fixed.height(),
            origin.0,
            origin.1,
        )
    } else {
        demons.field.clone()
    };

    let fine = stage("demons", warp_field(&aligned, &field))?;
    let mi_after_fine = stage("metrics", mutual_information(&fixed, &fine, cfg.bins))?;
    stage(
        "demons",
        io::save_image(&fine, &out_dir.join("fine_warped.pgm")),
    )?;
    stage(
        "demons",
        io::save_image(
            &checkerboard(&fixed, &fine, cfg.overlay_tile)?,
            &out_dir.join("overlay_fine.pgm"),
        ),
    )?;
    stage(
        "demons",
        io::save_field(&field, &out_dir.join("field.dfld")),
    )?;

    // landmark evaluation when both CSVs are supplied
    let (landmarks_coarse, landmarks_fine) = match (&cfg.landmarks_fixed, &cfg.landmarks_moving) {
        (Some(fp), Some(mp)) => {
            let lf = stage("eval", io::load_landmarks(fp))?;
            let lm = stage("eval", io::load_landmarks(mp))?;
            let center = SimilarityParams::center_of(fixed.width(), fixed.height());
            let inv = coarse.params.inverse();
            let pred_coarse = stage("eval", map_landmarks(&lf, &inv, center, None))?;
            let coarse_report = stage(
                "eval",
                landmark_error(&pred_coarse, &lm, cfg.scale_factor_mm_per_px),
            )?;
            let bent = stage(
                "eval",
                map_landmarks(&lf, &SimilarityParams::identity(), center, Some(&field)),
            )?;
            let pred_fine = stage("eval", map_landmarks(&bent, &inv, center, None))?;
            let fine_report = stage(
                "eval",
                landmark_error(&pred_fine, &lm, cfg.scale_factor_mm_per_px),
            )?;
            (Some(coarse_report), Some(fine_report))
        }
        _ => (None, None),
    };

    let report = PipelineReport {
        mi_before,
        mi_after_coarse,
        mi_after_fine,
        coarse,
        demons,
        landmarks_coarse,
        landmarks_fine,
    };
    stage(
        "report",
        io::write_atomic(
            &out_dir.join("report.txt"),
            render_report(&report).as_bytes(),
        ),
    )?;
    Ok(report)
}

fn stop_name(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Converged => "converged",
        StopReason::MseIncrease => "mse_increase",
        StopReason::MaxIterations => "max_iterations",
    }
}

/// Plain-text metrics report.
pub fn render_report(r: &PipelineReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mi_before_bits: {:.6}", r.mi_before);
    let _ = writeln!(s, "mi_after_coarse_bits: {:.6}", r.mi_after_coarse);
    let _ = writeln!(s, "mi_after_fine_bits: {:.6}", r.mi_after_fine);
    let p = &r.coarse.params;
    let _ = writeln!(
        s,
        "coarse_params: tx={:.4} ty={:.4} theta_rad={:.6} scale={:.5}",
        p.tx, p.ty, p.theta, p.scale
    );
    let _ = writeln!(
        s,
        "coarse: iterations={} converged={} final_mi_bits={:.6}",
        r.coarse.iterations, r.coarse.converged, r.coarse.final_mi
    );
    for (i, trace) in r.demons.mse_trace.iter().enumerate() {
        let first = trace.first().copied().unwrap_or(f64::NAN);
        let last = trace.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "demons_level {i}: iterations={} stop={} mse {:.6e} -> {:.6e}",
            r.demons.iterations_used[i],
            stop_name(r.demons.stop_reason[i]),
            first,
            last
        );
    }
    if let (Some(c), Some(f)) = (&r.landmarks_coarse, &r.landmarks_fine) {
        let _ = writeln!(
            s,
            "landmarks_coarse: mse_px2={:.4} rms_px={:.4} error_mm={:.4}",
            c.mse_px2, c.rms_px, c.error_mm
        );
        let _ = writeln!(
            s,
            "landmarks_fine: mse_px2={:.4} rms_px={:.4} error_mm={:.4}",
            f.mse_px2, f.rms_px, f.error_mm
        );
    }
    s
}

/// Edge-map + Demons stage alone, for inputs that are already coarsely
/// aligned. Writes `edges_*.pgm`, `fine_warped.pgm`, `overlay_fine.pgm`,
/// `field.dfld`, and `report.txt` into `out_dir`.
pub fn run_fine(
    edge_cfg: &EdgeConfig,
    demons_cfg: &DemonsConfig,
    overlay_tile: usize,
    fixed_path: &Path,
    moving_path: &Path,
    out_dir: &Path,
) -> Result<DemonsResult> {
    let fixed = stage("load", io::load_image(fixed_path))?;
    let moving = stage("load", io::load_image(moving_path))?;
    stage("load", fixed.same_dims(&moving))?;

    let edges_fixed = stage("edges", canny(&fixed, edge_cfg))?;
    let edges_moving = stage("edges", canny(&moving, edge_cfg))?;
    stage(
        "edges",
        io::save_image(&edges_fixed, &out_dir.join("edges_fixed.pgm")),
    )?;
    stage(
        "edges",
        io::save_image(&edges_moving, &out_dir.join("edges_moving.pgm")),
    )?;
    let pot_fixed = stage("edges", edge_potential(&edges_fixed, edge_cfg))?;
    let pot_moving = stage("edges", edge_potential(&edges_moving, edge_cfg))?;

    let demons = stage(
        "demons",
        demons_register(&pot_fixed, &pot_moving, demons_cfg),
    )?;
    let fine = stage("demons", warp_field(&moving, &demons.field))?;
    stage(
        "demons",
        io::save_image(&fine, &out_dir.join("fine_warped.pgm")),
    )?;
    stage(
        "demons",
        io::save_image(
            &checkerboard(&fixed, &fine, overlay_tile)?,
            &out_dir.join("overlay_fine.pgm"),
        ),
    )?;
    stage(
        "demons",
        io::save_field(&demons.field, &out_dir.join("field.dfld")),
    )?;

    let mut text = String::new();
    for (i, trace) in demons.mse_trace.iter().enumerate() {
        let _ = writeln!(
            text,
            "demons_level {i}: iterations={} stop={} mse {:.6e} -> {:.6e}",
            demons.iterations_used[i],
            stop_name(demons.stop_reason[i]),
            trace.first().copied().unwrap_or(f64::NAN),
            trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    stage(
        "report",
        io::write_atomic(&out_dir.join("report.txt"), text.as_bytes()),
    )?;
    Ok(demons)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.bins, 64);
        assert_eq!(cfg.n_samples, 20_000);
        assert_eq!(cfg.seed, 7);
        assert!((cfg.scale_factor_mm_per_px - 1.2).abs() < 1e-12);
        assert_eq!(cfg.demons.levels, 3);
        assert!((cfg.edges.low_threshold - 0.1).abs() < 1e-12);

        let err = serde_json::from_str::<PipelineConfig>("{\"bogus\": 1}");
        assert!(err.is_err());
        let err = serde_json::from_str::<PipelineConfig>("{\"demons\": {\"lvls\": 2}}");
        assert!(err.is_err());
    }

    #[test]
    fn nested_overrides_apply() {
        let cfg: PipelineConfig = serde_json::from_str(
            "{\"bins\": 32, \"demons\": {\"levels\": 2}, \"edges\": {\"low_threshold\": 0.05}}",
        )
        .unwrap();
        assert_eq!(cfg.bins, 32);
        assert_eq!(cfg.demons.levels, 2);
        assert!((cfg.edges.low_threshold - 0.05).abs() < 1e-12);
        // untouched fields keep their defaults
        assert_eq!(cfg.demons.iterations_per_level, 200);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = PipelineConfig {
            bins: 1,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.edges.low_threshold = 0.5;
        cfg.edges.high_threshold = 0.2;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.optimizer.min_step = 5.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn embed_field_offsets_vectors() {
        let mut roi = DisplacementField::new(2, 2);
        roi.set(1, 0, (0.5, -0.25));
        let full = embed_field(&roi, 6, 5, 3, 2);
        assert_eq!(full.get(4, 2), (0.5, -0.25));
        assert_eq!(full.get(0, 0), (0.0, 0.0));
        assert_eq!(full.get(5, 4), (0.0, 0.0));
    }
}
