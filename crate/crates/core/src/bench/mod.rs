//! Objective functions evaluated at integer resource levels (epochs).

mod tabular;
mod toy;

use thiserror::Error;

use crate::space::{ConfigSpace, Configuration, SpaceError};

pub use tabular::{SyntheticSpec, TabularBenchmark, TabularRow};
pub use toy::{toy_bias, toy_eval, ToyBenchmark, ToySpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("epoch must be positive, got {0}")]
    NonPositiveEpoch(f64),
    #[error("epoch {epoch} outside 1..={max}")]
    EpochOutOfRange { epoch: u32, max: u32 },
    #[error("parameter {name} = {value} outside [{lower}, {upper}]")]
    OutOfRange { name: String, value: f64, lower: f64, upper: f64 },
    #[error("row {index}: {msg}")]
    Schema { index: usize, msg: String },
    #[error("row {index} duplicates row {first}")]
    DuplicateRow { index: usize, first: usize },
    #[error("invalid configuration: {0}")]
    Space(#[from] SpaceError),
    #[error("malformed benchmark file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// A benchmark maps a configuration and epoch to a metric (lower is better)
/// and charges a virtual cost per trained epoch.
pub trait Benchmark: Send + Sync {
    fn space(&self) -> &ConfigSpace;

    fn max_resource(&self) -> u32;

    fn metric(&self, config: &Configuration, epoch: u32) -> Result<f64>;

    /// Virtual seconds per training epoch.
    fn cost_per_epoch(&self, config: &Configuration) -> Result<f64>;

    /// Encoded points proposals are restricted to, if any.
    fn admissible(&self) -> Option<&[Vec<f64>]> {
        None
    }

    /// Maps a proposal onto a configuration the benchmark can evaluate.
    fn snap(&self, config: Configuration) -> Configuration {
        config
    }
}
