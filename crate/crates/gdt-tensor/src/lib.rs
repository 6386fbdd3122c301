//! Dense row-major tensors with reverse-mode autodiff, an adaptive-moment
//! optimizer, and a binary checkpoint format.
//!
//! The core is generic over the scalar type; the rest of the workspace
//! uses the `f64` aliases exported here.

mod checkpoint;
mod error;
mod optim;
mod tape;
mod tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

pub use checkpoint::{load_checkpoint, load_checkpoint_map, save_checkpoint};
pub use error::{CheckpointError, TensorError};
pub use optim::{clip_global_norm, Adam, AdamConfig};
pub use tape::{Tape, TensorId};
pub use tensor::Tensor;

/// Element type the kernels are written against.
pub trait Scalar:
    Float + FromPrimitive + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an f64 literal into the working scalar type.
pub fn lit<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("literal representable in scalar type")
}

pub type Tensor64 = Tensor<f64>;
pub type Tape64 = Tape<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Tape32 = Tape<f32>;
