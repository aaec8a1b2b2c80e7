//! Dense matrices, reverse-mode autodiff, parameters and the Adam optimizer.

pub mod gradcheck;
pub mod matrix;
pub mod param;
pub mod tape;

pub use gradcheck::{finite_diff_grad, relative_error};
pub use matrix::Matrix;
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{softmax_rows, Gradients, Tape, Var};
