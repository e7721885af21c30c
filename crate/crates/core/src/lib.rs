//! Unadjusted Langevin and Hamiltonian Monte Carlo samplers, exact reference
//! dynamics for Gaussian targets, Wasserstein and total-variation distance
//! tools, and calculators for explicit asymptotic-bias bounds.

pub mod bounds;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
mod parallel;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
