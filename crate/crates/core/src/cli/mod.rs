//! Subcommand logic behind the `mcmclab` binary: configuration, dispatch
//! and CSV/JSON emission. Argument parsing lives in the binary.

mod commands;
mod config;

pub use commands::{
    bias_scan, bounds, contraction, coupling, gaussian_check, quantities, run, Command, GaussianCheckArgs,
};
pub use config::{
    BoundsSection, Config, ContractionSection, CouplingSection, KernelSection, OutputSection, QuantitiesSection,
    SweepSection, SEED_ENV,
};

use crate::error::Error;

/// Process exit status of a subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    CheckFailed,
    Diverged,
    ConfigError,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CheckFailed => 1,
            Status::Diverged => 2,
            Status::ConfigError => 64,
        }
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => Status::ConfigError,
            Error::Divergence { .. } => Status::Diverged,
            _ => Status::CheckFailed,
        }
    }
}

/// What a subcommand produced: text for standard output (empty when the
/// result went to a file), diagnostics and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub stdout: String,
    pub stderr: String,
}
