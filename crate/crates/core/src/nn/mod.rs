//! Minimal dense-network engine: forward/backward passes, Adam, gradient checks, snapshots.

mod adam;
mod gradcheck;
mod mlp;
pub mod snapshot;

pub use adam::{adam_step, AdamConfig, AdamState, ScalarAdam};
pub use gradcheck::{grad_check, fd_relative_error, grad_check_smooth, numeric_gradient, relative_error, GradCheckReport, FD_STEP};
pub use mlp::{Gradients, HiddenActivation, MlpParams, OutputActivation, Trace};
