//! Dense tensors and a tape-based reverse-mode differentiation engine.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_detailed, GradCheckReport};
pub use tape::{Gradients, OpKind, Tape, Var};
pub use tensor::{log_sum_exp, Tensor};
