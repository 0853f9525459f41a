//! Two-stage multimodal image registration.
//!
//! Aligns image pairs from different sensing modalities (infrared and
//! white-light face images being the motivating case) in two stages:
//!
//! 1. **Coarse**: a global similarity transform (translation, rotation,
//!    isotropic scale) found by maximizing sampled mutual information with a
//!    regular-step gradient ascent over a multi-resolution pyramid.
//! 2. **Fine**: free-form refinement with the Demons algorithm, run on
//!    Canny edge maps smoothed into continuous potentials so a mono-modal
//!    method applies across modalities.
//!
//! The crate also ships a synthetic face-phantom generator with exact ground
//! truth (transform, displacement field, landmark correspondences) and
//! landmark-based accuracy evaluation in pixels and millimeters.
//!
//! # Feature flags
//! - `parallel` (default): rayon data-parallel pixel loops. The sequential
//!   fallback produces bitwise-identical results; benches compare the two.
//!
//! # Quick start
//! ```
//! use mmreg::prelude::*;
//!
//! let pair = generate_pair(7, &SynthOptions::default()).unwrap();
//! let coarse = register_coarse(
//!     &pair.fixed, &pair.moving, &OptimizerConfig::default(), 64, 5_000, 7,
//! ).unwrap();
//! let aligned = warp_similarity(&pair.moving, &coarse.params);
//! assert_eq!(aligned.width(), pair.fixed.width());
//! ```

pub mod coarse;
pub mod demons;
pub mod edges;
pub mod error;
pub mod eval;
mod exec;
pub mod field;
pub mod filter;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};

/// One-stop imports for the common API surface.
pub mod prelude {
    pub use crate::coarse::{
        mi_objective_gradient, register_coarse, regular_step_descent, CoarseResult, OptimizerConfig,
    };
    pub use crate::demons::{
        demons_register, demons_step, mse, DemonsConfig, DemonsResult, StopReason,
    };
    pub use crate::edges::{canny, edge_potential, EdgeConfig};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{checkerboard, landmark_error, map_landmarks, EvalReport, LandmarkSet};
    pub use crate::field::{invert_field, upsample_field2, warp_field, DisplacementField};
    pub use crate::filter::{downsample2, gaussian_smooth, smooth_field};
    pub use crate::image::Image;
    pub use crate::metrics::{
        entropy, joint_histogram, mutual_information, sampled_mi, JointHistogram, Pdf,
    };
    pub use crate::pipeline::{run_fine, run_pipeline, PipelineConfig, PipelineReport};
    pub use crate::synth::{generate_pair, render_phantom, SynthOptions, SynthPair};
    pub use crate::transform::{warp_similarity, SimilarityParams};
}
