//! Inverse rendering: losses, adjoint gradients into the parameter set,
//! and the Adam loop.

mod adam;
mod config;
mod dataset;
mod loss;
mod run;

pub use adam::{adam_step, AdamState};
pub use config::{OptimConfig, TrainMask};
pub use dataset::{read_image, Dataset, FrameEntry, TransformsFile, View};
pub use loss::{loss_diff, loss_rgb, loss_smooth, surface_points};
pub use run::{accumulate_view, evaluate, optimize, train_step, OptimReport, StepMetrics};
