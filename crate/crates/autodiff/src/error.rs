use std::fmt;

/// Errors raised by tensor construction, tape operations, and checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TensorError {
    /// Operand shapes are incompatible for the requested operation.
    ShapeMismatch { op: &'static str, detail: String },
    /// A segment id is outside `0..num_segments`.
    SegmentOutOfRange { segment: usize, num_segments: usize },
    /// `backward` was called on a non-scalar value.
    NotScalar { len: usize },
    /// A variable from a different tape was passed in.
    DetachedTensor,
    /// A gather/scatter index exceeds the row count.
    IndexOutOfRange { index: usize, rows: usize },
    /// Checkpoint file is malformed or has an unsupported version.
    Checkpoint(String),
    /// Underlying I/O failure while reading or writing a checkpoint.
    Io(String),
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in {op}: {detail}")
            }
            TensorError::SegmentOutOfRange { segment, num_segments } => {
                write!(f, "segment id {segment} out of range (num_segments = {num_segments})")
            }
            TensorError::NotScalar { len } => {
                write!(f, "backward requires a scalar loss, got {len} elements")
            }
            TensorError::DetachedTensor => write!(f, "variable does not belong to this tape"),
            TensorError::IndexOutOfRange { index, rows } => {
                write!(f, "row index {index} out of range for {rows} rows")
            }
            TensorError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            TensorError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for TensorError {}

impl From<std::io::Error> for TensorError {
    fn from(e: std::io::Error) -> Self {
        TensorError::Io(e.to_string())
    }
}
