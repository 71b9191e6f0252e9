//! Evaluation transport: request/report types, in-process and subprocess
//! evaluators, and the virtual clock.

mod clock;
mod inproc;
mod subprocess;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ConfigId, Configuration, ParamValue};

pub use clock::{VirtualClock, WorkerSlots};
pub use inproc::InprocEvaluator;
pub use subprocess::{SubprocessEvaluator, CHECKPOINT_ENV};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("benchmark: {0}")]
    Benchmark(String),
    #[error("failed to launch evaluator: {0}")]
    Spawn(#[source] std::io::Error),
    #[error("evaluator i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("evaluator exited with {0}")]
    Exit(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("evaluator closed its output without a done message")]
    MissingDone,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Wire form of the configuration inside a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireConfig {
    pub id: ConfigId,
    pub params: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRequest {
    pub config: WireConfig,
    pub resume_from: u32,
    pub target: u32,
    pub report_at: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

impl EvaluationRequest {
    pub fn new(config: &Configuration, resume_from: u32, target: u32, report_at: Vec<u32>) -> Self {
        Self {
            config: WireConfig {
                id: config.id,
                params: config.values.clone(),
            },
            resume_from,
            target,
            report_at,
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidRequest(m.to_string()));
        if self.resume_from >= self.target {
            return bad("resume_from must be below target");
        }
        if self.report_at.last() != Some(&self.target) {
            return bad("last report point must equal target");
        }
        if !self.report_at.windows(2).all(|w| w[0] < w[1]) {
            return bad("report points must be strictly increasing");
        }
        if self.report_at[0] <= self.resume_from {
            return bad("report points must lie above resume_from");
        }
        Ok(())
    }
}

/// One intermediate result. `elapsed` is the time since the request started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub resource: u32,
    pub metric: f64,
    pub elapsed: f64,
}

pub trait Evaluator {
    /// Trains from `resume_from` to `target`, reporting at every `report_at`
    /// point. A failure discards all partial reports.
    fn evaluate(&mut self, request: &EvaluationRequest) -> Result<Vec<Report>, EvalError>;
}
