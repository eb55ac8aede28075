use std::fmt;

use spraygnn_autodiff::TensorError;

/// Errors raised across the simulator pipeline.
#[derive(Debug)]
pub enum CoreError {
    /// Spray axis is (numerically) parallel to the wall plane.
    ParallelAxis,
    /// Velocity magnitude is zero where a dwell time is needed.
    ZeroVelocity,
    /// Fewer than two layer scans available for interpolation.
    InsufficientScans { found: usize },
    /// Scan layer indices are not strictly increasing.
    NonMonotoneLayers,
    /// A referenced file does not exist.
    MissingFile(String),
    /// On-disk format version differs from what this build understands.
    SchemaVersionMismatch { found: u32, expected: u32 },
    /// Scan or snapshot length does not match the grid particle count.
    GridMismatch { expected: usize, found: usize },
    /// Regression fit has no variance to explain.
    DegenerateFit,
    /// A point-cloud metric was given an empty cloud.
    EmptyCloud,
    /// No samples available for training.
    EmptyDataset,
    /// Rollout horizon extends past the last layer.
    HorizonExceedsLayers { start: usize, ahead: usize, layers: usize },
    /// Ground-truth snapshot missing at a requested horizon.
    MissingTruth { layer: usize },
    /// Malformed manifest, scan, trajectory, or sidecar content.
    Format(String),
    Tensor(TensorError),
    Io(std::io::Error),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ParallelAxis => write!(f, "spray axis is parallel to the wall plane"),
            CoreError::ZeroVelocity => write!(f, "zero velocity: dwell time undefined"),
            CoreError::InsufficientScans { found } => {
                write!(f, "need at least 2 layer scans, found {found}")
            }
            CoreError::NonMonotoneLayers => {
                write!(f, "scan layer indices must be strictly increasing")
            }
            CoreError::MissingFile(path) => write!(f, "missing file: {path}"),
            CoreError::SchemaVersionMismatch { found, expected } => {
                write!(f, "schema version {found}, expected {expected}")
            }
            CoreError::GridMismatch { expected, found } => {
                write!(f, "grid mismatch: expected {expected} particles, found {found}")
            }
            CoreError::DegenerateFit => write!(f, "degenerate fit: no residual variance"),
            CoreError::EmptyCloud => write!(f, "point cloud is empty"),
            CoreError::EmptyDataset => write!(f, "no training samples available"),
            CoreError::HorizonExceedsLayers { start, ahead, layers } => {
                write!(f, "rollout of {ahead} layers from layer {start} exceeds {layers} layers")
            }
            CoreError::MissingTruth { layer } => {
                write!(f, "no ground-truth snapshot at layer boundary {layer}")
            }
            CoreError::Format(msg) => write!(f, "format error: {msg}"),
            CoreError::Tensor(e) => write!(f, "{e}"),
            CoreError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CoreError {}

impl From<TensorError> for CoreError {
    fn from(e: TensorError) -> Self {
        CoreError::Tensor(e)
    }
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e)
    }
}
