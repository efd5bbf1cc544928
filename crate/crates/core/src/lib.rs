//! Ensemble Kalman filters and the exact references they are checked against.
//!
//! * [`math`]: dense factorizations, solves and reproducible sampling.
//! * [`models`]: linear and nonlinear state-space models, including the
//!   scalar, growth-model, constant-velocity and Lorenz-96 benchmarks.
//! * [`kalman`]: the exact Kalman filter, batch and RTS smoothers, and the
//!   Monte Carlo Kalman filter.
//! * [`ensemble`]: stochastic and square-root EnKF updates, gain variants,
//!   inflation and covariance tapering.
//! * [`density`]: point-mass filter and kernel density estimates for
//!   scalar states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod ensemble;
mod error;
pub mod kalman;
pub mod math;
pub mod models;

pub use error::{Error, Result};
pub use math::{Matrix, RngStream, Vector};
