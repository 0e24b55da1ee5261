//! Simulated data-parallel SGD with exponentially growing batch sizes.
//!
//! `N` logical workers each draw a batch of stochastic gradients per round,
//! average them, and take part in one aggregation; the batch grows by a
//! factor `rho` every round, so a per-worker budget of `T` samples needs only
//! `O(log T)` aggregations. The crate provides:
//!
//! - [`objectives`]: deterministic objectives and stochastic gradient oracles,
//! - [`schedule`]: batch-size schedules, round counts and rate constants,
//! - [`executor`]: the worker pool, keyed sampling and aggregation,
//! - [`algorithms`]: CR-PSGD, its proximal outer loop, and baselines,
//! - [`verify`]: bound checks, rate fits and sweeps,
//! - [`cli`]: the `crpsgd` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod cli;
pub mod error;
pub mod executor;
pub mod objectives;
pub mod point;
pub mod rng;
pub mod schedule;
pub mod verify;

pub use error::{Error, Result};
pub use point::Point;
pub use rng::{RngStream, StreamKey};
