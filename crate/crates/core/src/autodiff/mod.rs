//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! Models record their forward pass on a [`Tape`]; [`Tape::backward`] walks the
//! nodes in reverse insertion order and returns [`Gradients`]. Parameters live
//! in a [`ParamStore`] and are bound onto a tape either as trainable leaves or
//! as constants, which is how a frozen model passes gradients to its inputs
//! without ever producing gradients for its own weights.

mod gradcheck;
pub(crate) mod kernels;
mod ops;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_many, grad_check_params, grad_check_with, relative_error, GradCheckReport, GRAD_CHECK_TOLERANCE};
pub use ops::{conv_out_len, conv_transpose_out_len, sigmoid};
pub use params::{Bound, ParamId, ParamStore};
pub use tape::{CustomOp, Gradients, Tape, Var};
pub use tensor::Tensor;
