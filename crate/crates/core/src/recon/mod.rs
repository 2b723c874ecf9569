//! Recovering training inputs from trained parameters.
//!
//! The loss is the squared norm of the readout's component outside the row
//! span of the candidate features; candidates move by momentum gradient
//! descent and are retracted to the radius-`√d` sphere after every step.

mod io;
mod optim;
mod problem;

pub use io::{read_trace_csv, write_trace_csv};
pub use optim::{recon_step, reconstruct, reconstruct_from, ReconConfig, ReconOutcome, ReconState, TracePoint, SPHERE_TOL};
pub use problem::{recon_grad, recon_loss, LossParts, ReconProblem, JITTER_CONDITION, JITTER_SCALE, LOSS_CLAMP};

pub(crate) use problem::solve_gram;
