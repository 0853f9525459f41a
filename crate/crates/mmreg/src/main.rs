//! Command-line front end for the registration pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmreg::io;
use mmreg::prelude::*;

#[derive(Parser)]
#[command(
    name = "mmreg",
    version,
    about = "Multimodal image registration: MI coarse alignment + edge-map Demons refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarse similarity registration by sampled mutual information.
    Coarse(CoarseArgs),
    /// Edge-map Demons refinement of an already coarsely aligned pair.
    Fine(FineArgs),
    /// Full pipeline: coarse -> ROI -> edges -> Demons, with report.
    Pipeline(PipelineArgs),
    /// Canny edge map of a single image.
    Edges(EdgesArgs),
    /// Generate a synthetic multimodal pair with ground truth.
    Synth(SynthArgs),
    /// Score two landmark CSVs against each other.
    Eval(EvalArgs),
    /// Checkerboard fusion of two images.
    Overlay(OverlayArgs),
}

#[derive(Args)]
struct CoarseArgs {
    #[arg(long)]
    fixed: PathBuf,
    #[arg(long)]
    moving: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    tile: usize,
}

#[derive(Args)]
struct FineArgs {
    #[arg(long)]
    fixed: PathBuf,
    #[arg(long)]
    moving: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pyramid depth.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Iteration cap per level.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Field regularization sigma, pixels.
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    /// Canny low hysteresis threshold (fraction of gradient max).
    #[arg(long, default_value_t = 0.1)]
    low: f64,
    /// Canny high hysteresis threshold (fraction of gradient max).
    #[arg(long, default_value_t = 0.25)]
    high: f64,
    #[arg(long, default_value_t = 16)]
    tile: usize,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON config; flags below override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fixed: PathBuf,
    #[arg(long)]
    moving: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fine-stage region of interest: x,y,w,h.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    roi: Option<Vec<usize>>,
    #[arg(long)]
    landmarks_fixed: Option<PathBuf>,
    #[arg(long)]
    landmarks_moving: Option<PathBuf>,
}

#[derive(Args)]
struct EdgesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    low: f64,
    #[arg(long, default_value_t = 0.25)]
    high: f64,
    /// Pre-smoothing sigma, pixels.
    #[arg(long, default_value_t = 1.4)]
    sigma: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Max free-form displacement, pixels.
    #[arg(long, default_value_t = 6.0)]
    deform: f64,
    /// Modality-gap strength in [0, 1].
    #[arg(long, default_value_t = 0.8)]
    gap: f64,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Max |translation|, pixels.
    #[arg(long, default_value_t = 10.0)]
    translation: f64,
    /// Max |rotation|, degrees.
    #[arg(long, default_value_t = 10.0)]
    rotation: f64,
    /// Scale drawn from [1-span, 1+span].
    #[arg(long, default_value_t = 0.1)]
    scale_span: f64,
    /// Intensity noise sigma.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 8)]
    landmarks: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    landmarks_a: PathBuf,
    #[arg(long)]
    landmarks_b: PathBuf,
    /// Millimeters per pixel.
    #[arg(long, default_value_t = 1.2)]
    scale_mm: f64,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 16)]
    tile: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Coarse(a) => cmd_coarse(a),
        Command::Fine(a) => cmd_fine(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Edges(a) => cmd_edges(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Overlay(a) => cmd_overlay(a),
    }
}

fn cmd_coarse(a: CoarseArgs) -> Result<()> {
    let fixed = io::load_image(&a.fixed)?;
    let moving = io::load_image(&a.moving)?;
    let result = register_coarse(
        &fixed,
        &moving,
        &OptimizerConfig::default(),
        a.bins,
        a.samples,
        a.seed,
    )?;
    let aligned = warp_similarity(&moving, &result.params);
    io::save_image(&aligned, &a.out.join("coarse_warped.pgm"))?;
    if fixed.width() == aligned.width() && fixed.height() == aligned.height() {
        let overlay = checkerboard(&fixed, &aligned, a.tile)?;
        io::save_image(&overlay, &a.out.join("overlay_coarse.pgm"))?;
    }
    io::write_atomic(
        &a.out.join("coarse_params.json"),
        serde_json::to_string_pretty(&result.params)
            .expect("params serialize")
            .as_bytes(),
    )?;
    println!(
        "coarse: tx={:.3} ty={:.3} theta_rad={:.5} scale={:.4} (MI {:.4} bits, {} iterations, converged: {})",
        result.params.tx,
        result.params.ty,
        result.params.theta,
        result.params.scale,
        result.final_mi,
        result.iterations,
        result.converged
    );
    Ok(())
}

fn cmd_fine(a: FineArgs) -> Result<()> {
    let edge_cfg = EdgeConfig {
        low_threshold: a.low,
        high_threshold: a.high,
        ..EdgeConfig::default()
    };
    let demons_cfg = DemonsConfig {
        levels: a.levels,
        iterations_per_level: a.iters,
        smooth_sigma: a.sigma,
        ..DemonsConfig::default()
    };
    let result = run_fine(&edge_cfg, &demons_cfg, a.tile, &a.fixed, &a.moving, &a.out)?;
    for (i, trace) in result.mse_trace.iter().enumerate() {
        println!(
            "level {i}: {} iterations, final mse {:.6e}",
            result.iterations_used[i],
            trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(bins) = a.bins {
        cfg.bins = bins;
    }
    if let Some(samples) = a.samples {
        cfg.n_samples = samples;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(roi) = &a.roi {
        cfg.roi = Some([roi[0], roi[1], roi[2], roi[3]]);
    }
    if a.landmarks_fixed.is_some() {
        cfg.landmarks_fixed = a.landmarks_fixed.clone();
    }
    if a.landmarks_moving.is_some() {
        cfg.landmarks_moving = a.landmarks_moving.clone();
    }
    let report = run_pipeline(&cfg, &a.fixed, &a.moving, &a.out)?;
    print!("{}", mmreg::pipeline::render_report(&report));
    Ok(())
}

fn cmd_edges(a: EdgesArgs) -> Result<()> {
    let cfg = EdgeConfig {
        gauss_sigma: a.sigma,
        low_threshold: a.low,
        high_threshold: a.high,
        ..EdgeConfig::default()
    };
    let img = io::load_image(&a.input)?;
    let edges = canny(&img, &cfg)?;
    io::save_image(&edges, &a.out)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let opts = SynthOptions {
        size: a.size,
        translation: a.translation,
        rotation_deg: a.rotation,
        scale_delta: a.scale_span,
        deform: a.deform,
        gap: a.gap,
        noise: a.noise,
        landmarks: a.landmarks,
    };
    let pair = generate_pair(a.seed, &opts)?;
    io::save_image(&pair.fixed, &a.out.join("fixed.pgm"))?;
    io::save_image(&pair.moving, &a.out.join("moving.pgm"))?;
    io::save_field(&pair.truth_field, &a.out.join("truth_field.dfld"))?;
    io::save_landmarks(&pair.landmarks_fixed, &a.out.join("landmarks_fixed.csv"))?;
    io::save_landmarks(&pair.landmarks_moving, &a.out.join("landmarks_moving.csv"))?;
    io::write_atomic(
        &a.out.join("truth_params.json"),
        serde_json::to_string_pretty(&pair.truth_params)
            .expect("params serialize")
            .as_bytes(),
    )?;
    println!(
        "synth pair seed {}: tx={:.3} ty={:.3} theta_rad={:.5} scale={:.4}, max deform {:.3} px",
        a.seed,
        pair.truth_params.tx,
        pair.truth_params.ty,
        pair.truth_params.theta,
        pair.truth_params.scale,
        pair.truth_field.max_magnitude()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let la = io::load_landmarks(&a.landmarks_a)?;
    let lb = io::load_landmarks(&a.landmarks_b)?;
    let report = landmark_error(&la, &lb, a.scale_mm)?;
    println!("pairs: {}", report.per_pair_distances.len());
    for (i, d) in report.per_pair_distances.iter().enumerate() {
        println!("pair {i}: {d:.4} px");
    }
    println!("mse_px2: {:.4}", report.mse_px2);
    println!("rms_px: {:.4}", report.rms_px);
    println!(
        "error_mm: {:.4} (at {} mm/px)",
        report.error_mm, report.scale_factor
    );
    Ok(())
}

fn cmd_overlay(a: OverlayArgs) -> Result<()> {
    let img_a = io::load_image(&a.a)?;
    let img_b = io::load_image(&a.b)?;
    let out = checkerboard(&img_a, &img_b, a.tile)?;
    io::save_image(&out, &a.out)?;
    Ok(())
}
