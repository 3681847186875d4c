//! Momentum SGD, weight decay, early stopping and quadratic reference solutions.

mod early_stop;
mod quadratic;
mod sgd;

pub use early_stop::{EarlyStopping, StopDecision};
pub use quadratic::QuadraticModel;
pub use sgd::{sgd_step, sgd_step_layers, OptimConfig, OptimizerState};
