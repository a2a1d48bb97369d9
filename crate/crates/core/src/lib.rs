//! Latency simulation and closed-form analysis for heterogeneous
//! master/worker pools.
//!
//! A master holds N divisible data points and K workers process them, each
//! point taking an exponential time at the worker's own rate. The crate
//! simulates and analyzes five ways of assigning the work:
//!
//! - `oracle`: the work-conserving lower bound (one fictitious machine at
//!   the pooled rate),
//! - `mds`: an erasure-coded baseline that waits for the L fastest workers,
//!   with L optimized,
//! - `fixed`: a one-shot rate-proportional assignment that waits for all,
//! - `exchange_known`: iterative reassignment of leftovers using the true
//!   rates,
//! - `exchange_unknown`: the same loop driven by online rate estimates under
//!   a per-worker storage cap.
//!
//! Runs report computation time, extra points shipped after the initial
//! assignment, and the number of reassignment epochs; the `analytic` module
//! provides the matching closed forms.

pub mod analytic;
pub mod cli;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod stochastic;

pub use error::Error;
