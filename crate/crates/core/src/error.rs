use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid extent {width}x{height}x{frames}: {reason}")]
    InvalidExtent {
        width: usize,
        height: usize,
        frames: usize,
        reason: &'static str,
    },
    #[error("extent mismatch: expected {expected:?}, got {actual:?}")]
    ExtentMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("aliased stimulus: temporal frequency {0} exceeds the Nyquist limit of 0.5 cycles/frame")]
    Aliased(f64),
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
    #[error("grid hash mismatch: file carries {found:016x}, spec hashes to {expected:016x}")]
    HashMismatch { expected: u64, found: u64 },
    #[error("line {line}: invalid activation {value} for stimulus {stimulus_id}, filter {filter_id}")]
    InvalidActivation {
        line: usize,
        stimulus_id: usize,
        filter_id: usize,
        value: String,
    },
    #[error("line {line}: duplicate row for stimulus {stimulus_id}, filter {filter_id}")]
    DuplicateRow {
        line: usize,
        stimulus_id: usize,
        filter_id: usize,
    },
    #[error("line {line}: stimulus {stimulus_id} outside grid of {count} stimuli")]
    StimulusOutOfRange {
        line: usize,
        stimulus_id: usize,
        count: usize,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("incomplete response table for filter {0}")]
    Incomplete(usize),
    #[error("filter {0} is inactive (no positive activation)")]
    InactiveFilter(usize),
    #[error("unknown filter {0}")]
    UnknownFilter(usize),
    #[error("provider failure at {context}: {message}")]
    Provider { context: String, message: String },
    #[error("non-integer-multiple frequency {value} along {axis} (fundamental 1/{size})")]
    NonIntegerFrequency {
        axis: &'static str,
        value: f64,
        size: usize,
    },
    #[error("point ({x}, {y}) outside flow map of {width}x{height}")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("missing flow map for scale {scale}, direction {direction}, level {level}")]
    MissingFlow {
        scale: u32,
        direction: String,
        level: String,
    },
    #[error("invalid flow file {path}: {reason}")]
    InvalidFlo { path: PathBuf, reason: String },
    #[error("invalid volume file: {0}")]
    InvalidVolumeFile(String),
    #[error("peak response must be positive, got {0}")]
    NonPositivePeak(f64),
    #[error("{0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Image(e.to_string())
    }
}
