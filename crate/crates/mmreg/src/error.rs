//! Error type shared by all registration stages.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid sigma {0}: must be >= 0")]
    InvalidSigma(f64),

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("bad target dims {target_w}x{target_h} for upsampling a {src_w}x{src_h} field")]
    BadTargetDims {
        src_w: usize,
        src_h: usize,
        target_w: usize,
        target_h: usize,
    },

    #[error("bad bin count {0}: need at least 2")]
    BadBinCount(usize),

    #[error("too few surviving samples ({0}); transform maps most of the image out of support")]
    TooFewSamples(usize),

    #[error("rect ({x},{y}) {w}x{h} out of bounds for {img_w}x{img_h} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        img_w: usize,
        img_h: usize,
    },

    #[error("mapped point ({x:.3},{y:.3}) lies outside the {w}x{h} displacement field")]
    OutOfField { x: f64, y: f64, w: usize, h: usize },

    #[error("landmark sets differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("landmark sets are empty")]
    EmptySets,

    #[error("bad options: {0}")]
    BadOptions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line} of {path}: {reason}")]
    ParseError {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("bad magic in {path}: expected DFLD1")]
    BadMagic { path: PathBuf },

    #[error("size mismatch in {path}: header says {expected} bytes of payload, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
