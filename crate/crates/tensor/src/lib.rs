//! Dense tensors with tape-based reverse-mode differentiation, sized for training
//! small convolutional networks on a CPU.
//!
//! Values are recorded on a [`Tape`] as [`Var`]s; [`Tape::backward`] replays the tape
//! in reverse and returns gradients keyed by parameter name. [`adam_step`] consumes
//! those gradients.
//!
//! ```
//! use sardiff_tensor::{Tape, Tensor};
//!
//! let tape = Tape::<f64>::new();
//! let x = tape.param("x", &Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
//! let loss = x.mul(&x).unwrap().sum();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get("x").unwrap().data(), &[2.0, 4.0, 6.0]);
//! ```

mod adam;
mod error;
mod ops;
mod scalar;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use error::{Result, TensorError};
pub use ops::conv2d_output_size;
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var, VarId};
pub use tensor::Tensor;
