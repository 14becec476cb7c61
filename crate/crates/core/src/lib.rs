//! Stochastic numerics: Monte Carlo estimators, randomized ODE solvers,
//! exact simulation of Wiener and Poisson processes, Euler–Maruyama schemes
//! for jump-diffusion SDEs, option pricing, parameter estimation and
//! Monte Carlo forecasting.
//!
//! Every random draw comes from a [`rand::RandomStream`] addressed by
//! `(seed, stream_id)`. Parallel loops give each sample or path its own
//! substream, so results are identical for any number of worker threads.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod error;
pub mod exec;
pub mod forecast;
pub mod grid;
pub mod mc;
pub mod numerics;
pub mod ode;
pub mod pricing;
pub mod processes;
pub mod quadrature;
pub mod rand;
pub mod rate;
pub mod sde;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use mc::{ConfidenceInterval, McAccumulator};
pub use rand::RandomStream;
