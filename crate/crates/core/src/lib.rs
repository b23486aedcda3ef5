#![cfg_attr(not(feature = "std"), no_std)]
//! Simulation, likelihood, inference, moments, and evaluation for the
//! mixture-of-interacting-cascades (MIC) process: a marked multivariate
//! Hawkes process in which users excite each other through a weighted
//! influence graph and cascades reinforce each other through a
//! row-stochastic interaction matrix Σ.
//!
//! The crate is `no_std` with `alloc`; the default `std` feature adds
//! thread-parallel evaluation of independent per-user and per-replication work.

extern crate alloc;

mod error;
pub mod evaluation;
pub mod inference;
pub mod linalg;
pub mod likelihood;
mod math;
pub mod model;
pub mod moments;
pub mod optim;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use likelihood::{
    compensator, gradient, hessian_sigma, log_likelihood, partial_log_likelihood, LikelihoodBreakdown, Wrt,
};
pub use model::{
    Event, EventLog, ExponentialKernel, IntensityState, Mixing, ModelParams, UserGraph,
};
pub use evaluation::{evaluate, split_train_test, test_log_likelihood, EvalConfig, MetricReport};
pub use inference::{cross_validate, fit, initialize, FitConfig, FitResult, ModelVariant};
pub use moments::{expected_counts, expected_intensity, moment_curves, stability, MomentCurves};
pub use simulator::{generate_scenario, simulate, simulate_from, InteractionSpec, ScenarioConfig};
