//! Push-sum average consensus on random time-varying directed graphs.
//!
//! The crate simulates push-sum over sampled column-stochastic weight
//! matrices, tracks the mixing timeline (renewal times and contraction
//! windows), evaluates the analytic error bounds and checks them on seeded
//! Monte Carlo experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod digraph;
pub mod ergodicity;
pub mod error;
pub mod montecarlo;
pub mod output;
pub mod pushsum;
pub mod randgen;
pub mod stochmat;
pub mod verify;

pub use digraph::DirectedGraph;
pub use error::{Error, Result};
pub use montecarlo::{ExperimentConfig, Execution};
pub use pushsum::PushSumState;
pub use randgen::ProbabilitySequence;
pub use stochmat::{Orientation, SquareMatrix, StochasticMatrix};
