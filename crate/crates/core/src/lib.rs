//! Train random-features and two-layer regression models, then recover their
//! training inputs from the trained parameters alone.
//!
//! The attack minimizes `‖P⊥ θ*‖²`, the squared distance of the trained
//! readout from the row span of candidate features, over candidate inputs
//! constrained to the radius-`√d` sphere. Once the parameter count exceeds
//! roughly `d·n`, the minimizers coincide with the training set up to row
//! order (and, for activations with single-parity higher Hermite
//! coefficients, up to per-row sign).
//!
//! Module map:
//!
//! * [`numkit`]: dense matrices, seeded Gaussian streams, conjugate gradient
//!   and the minimum-norm interpolator.
//! * [`features`]: activations, Hermite analysis, feature maps and trainers.
//! * [`datagen`]: synthetic sphere data and CIFAR-10 ingestion.
//! * [`recon`]: the reconstruction loss, its gradient and the optimizer.
//! * [`metrics`]: assignment-based reconstruction error, span residual, MSE.
//! * [`harness`]: sweep orchestration, CSV outputs and the CLI.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod numkit;
pub mod recon;

pub use error::{Error, Result};
