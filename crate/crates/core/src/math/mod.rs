//! Dense matrices, activations and losses.

mod activation;
mod loss;
mod matrix;

pub use activation::{sigmoid, softmax_row, Activation};
pub use loss::{Loss, PROB_FLOOR};
pub use matrix::Matrix;
pub(crate) use matrix::matmul_into;
