use std::sync::Arc;

use super::{EvalError, EvaluationRequest, Evaluator, Report};
use crate::bench::Benchmark;
use crate::space::{Configuration, Origin};

/// Evaluates against a benchmark in this process; time is the benchmark's
/// virtual cost.
#[derive(Clone)]
pub struct InprocEvaluator {
    bench: Arc<dyn Benchmark>,
}

impl InprocEvaluator {
    pub fn new(bench: Arc<dyn Benchmark>) -> Self {
        Self { bench }
    }
}

impl Evaluator for InprocEvaluator {
    fn evaluate(&mut self, request: &EvaluationRequest) -> Result<Vec<Report>, EvalError> {
        request.validate()?;
        if request.target > self.bench.max_resource() {
            return Err(EvalError::Benchmark(format!(
                "target {} exceeds maximum resource {}",
                request.target,
                self.bench.max_resource()
            )));
        }
        let config = Configuration {
            id: request.config.id,
            values: request.config.params.clone(),
            origin: Origin::Random,
        };
        let unit_cost = self
            .bench
            .cost_per_epoch(&config)
            .map_err(|e| EvalError::Benchmark(e.to_string()))?;
        request
            .report_at
            .iter()
            .map(|&r| {
                let metric = self
                    .bench
                    .metric(&config, r)
                    .map_err(|e| EvalError::Benchmark(e.to_string()))?;
                Ok(Report {
                    resource: r,
                    metric,
                    elapsed: unit_cost * (r - request.resume_from) as f64,
                })
            })
            .collect()
    }
}
