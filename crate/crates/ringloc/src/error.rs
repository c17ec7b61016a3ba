//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no points remain after filtering")]
    EmptyAfterFilter,
    #[error("rendered scan is empty")]
    EmptyScan,
    #[error("cloud has {have} points, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("grid is not square: {0}x{1}")]
    NonSquareInput(usize, usize),
    #[error("constant input cannot be normalized")]
    DegenerateConstantInput,
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: Vec<usize>, b: Vec<usize> },
    #[error("map index is empty")]
    EmptyIndex,
    #[error("scan {id}: {source}")]
    Scan { id: i64, source: Box<Error> },
    #[error("no correspondences within {max_dist} m of the initial alignment")]
    NoCorrespondences { max_dist: f64 },
    #[error("trajectory length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no outcomes to evaluate")]
    EmptyOutcomes,
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the id of the scan a pipeline stage failed on.
    pub fn for_scan(self, id: i64) -> Error {
        Error::Scan {
            id,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
