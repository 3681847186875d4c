//! Feedforward networks trained with two regularizers: multi-task training
//! with input/output auto-encoders under evolving importance weights, and a
//! class-wise hint penalty that pulls same-class hidden representations
//! together.

pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod math;
pub mod network;
pub mod optim;

pub use error::{Error, Result};
pub use math::{Activation, Loss, Matrix};
pub use network::{ForwardTrace, GradientSet, LayerSpec, Network};
pub mod hint;
pub mod metrics;
pub mod mtl;
pub mod rng;
