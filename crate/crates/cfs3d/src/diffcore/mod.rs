//! Minimal reverse-mode differentiation engine.
//!
//! A [`Tape`] owns every tensor created during one forward pass; values are
//! addressed by [`TensorId`] handles. Operations append a record holding the
//! inputs, the output, and a boxed [`TapeOp`] that knows how to push the
//! output gradient back onto the inputs. [`Tape::backward`] walks the records
//! in reverse, which is a valid topological order because an output id is
//! always larger than its input ids.
//!
//! Everything is `f64` and single-threaded, so gradients are bitwise
//! reproducible. The [`gradcheck`] module provides the central-difference
//! oracle used by the test suite to verify every analytic backward pass.

mod adam;
mod gradcheck;
mod ops;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig, AdamEntry};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use ops::{
    activation, add, concat_cols, global_max_pool, linear, mul, repeat_rows, scale, sum,
    Activation,
};
pub use tape::{Grads, Tape, TapeOp, TensorId};
pub use tensor::Tensor;
