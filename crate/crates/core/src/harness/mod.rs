//! Experiment configuration, method composition, runs and comparisons.

pub mod compare;
pub mod config;
pub mod export;
pub mod run;

use thiserror::Error;

pub use compare::{compare, median, Comparison, MethodRow};
pub use config::{BenchmarkSpec, Composition, EnsembleLevels, ExperimentConfig, Method, Overrides, PlanKind};
pub use export::{
    read_trajectory_csv, write_merged_trajectory_csv, write_run_dir, write_trajectory_csv, write_weights_csv,
};
pub use run::{run, PlanLog, RunResult, RunSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Space(#[from] crate::space::SpaceError),
    #[error(transparent)]
    Bench(#[from] crate::bench::BenchError),
    #[error(transparent)]
    Sched(#[from] crate::sched::SchedError),
    #[error(transparent)]
    Ensemble(#[from] crate::ensemble::EnsembleError),
    #[error(transparent)]
    Records(#[from] crate::records::RecordError),
    #[error(transparent)]
    Eval(#[from] crate::exec::EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("reference method `{0}` has no runs")]
    MissingReference(String),
    #[error("no runs given")]
    MissingRuns,
}

pub type Result<T> = std::result::Result<T, HarnessError>;
