//! Dense-tensor numeric core with reverse-mode automatic differentiation.
//!
//! The building blocks here are deliberately small: a row-major [`Tensor`],
//! a [`Tape`] that records forward operations and replays them backwards to
//! produce exact adjoints, the [`AdamState`] optimizer, and a versioned
//! binary checkpoint format for named parameter sets.
//!
//! Everything is generic over the scalar type through the [`Scalar`] trait;
//! `f32` and `f64` are provided. Checkpoint files always store `f64` values.

mod adam;
mod checkpoint;
mod error;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_MAGIC};
pub use error::TensorError;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the tensor core: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}
