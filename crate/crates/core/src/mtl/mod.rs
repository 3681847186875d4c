//! Structured-output regression with input and output auto-encoders.
//!
//! The weighted criterion is
//! `J = λ_sup·J_s + λ_in·J_in + λ_out·J_out`, with weights that evolve over
//! training epochs according to a [`ScheduleSpec`].

mod dataset;
mod model;
mod schedule;
mod train;

pub use dataset::{corrupt_input, SampleKind, TriModalBatch, TriModalDataset};
pub use model::{MtlArchitecture, MtlGradients, MtlLosses, MtlNetwork, Segment};
pub use schedule::{Endpoints, ImportanceWeights, ScheduleKind, ScheduleSpec};
pub use train::{
    fit_mtl, train_epoch_mtl, MtlEpochLog, MtlFit, MtlOptimizers, MtlTrainConfig, TaskMask,
};
