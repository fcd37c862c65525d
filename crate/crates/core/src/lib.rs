//! Courtesy-controllable trajectory generation.
//!
//! The crate covers the full learning pipeline without touching the
//! filesystem:
//!
//! - [`types`] and [`synth`]: interacting-pair scenarios and a seeded
//!   generator with a reactive (IDM-style) ground-truth agent.
//! - [`nn`]: a small reverse-mode autodiff graph, feedforward networks and Adam.
//! - [`predictor`]: a dual-mode (marginal / conditional) Gaussian-mixture
//!   trajectory predictor.
//! - [`courtesy`]: the reward model, the differentiable courtesy operator and
//!   dataset auto-labeling.
//! - [`scbg`]: the courtesy-conditioned generator and its losses.
//! - [`range`]: quantile regression of the feasible courtesy interval.
//! - [`eval`]: controllability and realism metrics plus the ablation harness.
//!
//! Everything is `no_std` + `alloc`; file formats and the command line live
//! in the companion `scbg` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod courtesy;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod predictor;
pub mod range;
pub mod rng;
pub mod scbg;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{Agent, DatasetSplit, Family, Observation, Polyline, Scenario, Trajectory};
