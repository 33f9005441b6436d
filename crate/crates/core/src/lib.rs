//! Maximum composite likelihood estimation for binary (+/-1) restricted
//! Boltzmann machines.
//!
//! The `k`-th order composite likelihood averages the log-conditional of every
//! size-`k` block of visible units given the rest, over the data. It is an upper
//! bound on the true log-likelihood that tightens monotonically in `k` and
//! coincides with it at `k = n`. This crate provides the objective and its exact
//! gradient, a brute-force oracle for small models, block Gibbs sampling, plain
//! gradient-ascent training, and a multi-trial synthetic experiment harness.

pub mod blocks;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod gradients;
mod kernel;
pub mod model;
pub mod objectives;
pub mod oracle;
pub mod sampler;
pub mod seed;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use blocks::{family_weight, Block, BlockFamily};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use gradients::{
    block_expectation, cl_gradient, cl_objective_and_gradient, ml_gradient, ml_objective_and_gradient,
    pl_gradient, GradientTriple,
};
pub use model::{HiddenState, RbmParams, Spins, VisibleState};
pub use objectives::{composite_likelihood, data_moments, pseudo_likelihood};
pub use oracle::ExactOracle;
pub use sampler::{generate_dataset, generate_exact, SamplerConfig};
pub use trainer::{init_params, mean_absolute_deviation, train, train_from, Mad, Method, TrainConfig, TrainTrace};
