//! Generalized sampling and minimum-MSE recovery of stochastic graph signals.
//!
//! The crate models a weighted undirected graph, its Laplacian spectrum, and
//! wide-sense stationary processes defined on it. On top of that it builds
//! sampling operators in two domains (vertex selection after a spectral
//! prefilter, and folding of the graph spectrum), the Wiener-style correction
//! filters that minimize mean squared reconstruction error for a fixed or a
//! free interpolation basis, their subspace/smoothness special cases, and a
//! seeded Monte-Carlo benchmark harness that reproduces the recovery error
//! tables from the experiments.
//!
//! Everything is deterministic given the seeds that enter the public APIs:
//! the benchmark CSV is byte-identical across runs and across worker-thread
//! counts.

pub mod bench;
pub mod error;
pub mod graph;
pub mod priors;
pub mod sampling;
pub mod selftest;
pub mod spectral;
pub mod stationarity;
pub mod wiener;

mod linalg;
mod seed;

pub use error::{Error, Result};
