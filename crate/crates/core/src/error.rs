use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the localisation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("window {win_h}x{win_w} does not fit in image {image_h}x{image_w}")]
    WindowLargerThanImage {
        win_h: usize,
        win_w: usize,
        image_h: usize,
        image_w: usize,
    },

    #[error("window {height}x{width} is smaller than the {grid}x{grid} feature grid")]
    WindowTooSmall {
        height: usize,
        width: usize,
        grid: usize,
    },

    #[error("feature vector has length {got}, model expects {expected}")]
    FeatureLengthMismatch { expected: usize, got: usize },

    #[error("training set must contain both classes and at least two samples")]
    DegenerateTrainingSet,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no annotation file for image {}", .0.display())]
    MissingAnnotation(PathBuf),

    #[error("malformed JSON in {}: {message}", .path.display())]
    MalformedJson { path: PathBuf, message: String },

    #[error("invariant violated in {}: {message}", .path.display())]
    InvariantViolation { path: PathBuf, message: String },

    #[error("could not place {requested} markers after {attempts} attempts")]
    PlacementInfeasible { requested: usize, attempts: usize },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("model feature configuration {found} does not match expected {expected}")]
    ModelConfigMismatch { expected: String, found: String },

    #[error("image codec error for {}: {source}", .path.display())]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("I/O error for {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
