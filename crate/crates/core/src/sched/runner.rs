use log::warn;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::brackets::{BracketSpec, Round};
use super::fgf::{fgf_schedule, FgfMode};
use super::glosh::{glosh_select, sh_select, LambdaSchedule, Selection};
use super::{Result, SchedError};
use crate::exec::{EvaluationRequest, Evaluator, VirtualClock, WorkerSlots};
use crate::records::{Measurement, RunStore};
use crate::space::{ConfigId, Configuration, Origin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SelectionMode {
    Sh,
    Glosh { lambda: LambdaSchedule },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunnerConfig {
    pub r_max: u32,
    pub eta: u32,
    pub fgf: FgfMode,
    pub selection: SelectionMode,
    /// Decision levels of the HyperBand geometry.
    pub checkpoints: Vec<u32>,
    pub workers: usize,
    pub time_limit: Option<f64>,
    pub max_evaluations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub training_units: u64,
    pub evaluations: usize,
    pub measurements: usize,
    pub failures: usize,
    pub revivals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub r: u32,
    pub evaluated: Vec<ConfigId>,
    pub kept: Vec<ConfigId>,
    pub revived: Vec<ConfigId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStatus {
    Completed,
    /// The time limit or evaluation cap was reached.
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketLog {
    pub bracket_id: u32,
    pub spec: BracketSpec,
    pub rounds: Vec<RoundLog>,
    pub status: BracketStatus,
}

/// Executes brackets against an evaluator, recording into a store. Rounds are
/// synchronous: every evaluation of a round finishes before selection.
pub struct BracketRunner<'e> {
    pub config: RunnerConfig,
    pub store: RunStore,
    pub clock: VirtualClock,
    pub counters: Counters,
    evaluator: &'e mut dyn Evaluator,
    glosh_rng: ChaCha8Rng,
    next_bracket: u32,
}

impl<'e> BracketRunner<'e> {
    pub fn new(config: RunnerConfig, store: RunStore, evaluator: &'e mut dyn Evaluator, glosh_rng: ChaCha8Rng) -> Self {
        Self {
            config,
            store,
            clock: VirtualClock::new(),
            counters: Counters::default(),
            evaluator,
            glosh_rng,
            next_bracket: 0,
        }
    }

    /// True once no further evaluation may start.
    pub fn exhausted(&self) -> bool {
        self.config.time_limit.is_some_and(|t| self.clock.now() >= t)
            || self.config.max_evaluations.is_some_and(|m| self.counters.evaluations >= m)
    }

    pub fn run_bracket(&mut self, spec: BracketSpec, configs: Vec<Configuration>) -> Result<BracketLog> {
        let rounds = spec.rounds(self.config.r_max, self.config.eta)?;
        if configs.len() != spec.n0 as usize {
            return Err(SchedError::ConfigCount {
                expected: spec.n0 as usize,
                got: configs.len(),
            });
        }
        let bracket_id = self.next_bracket;
        self.next_bracket += 1;
        let mut log = BracketLog {
            bracket_id,
            spec,
            rounds: Vec::with_capacity(rounds.len()),
            status: BracketStatus::Completed,
        };
        let mut current: Vec<ConfigId> = Vec::with_capacity(configs.len());
        for c in configs {
            current.push(c.id);
            self.store.register(c).map_err(|e| SchedError::Store(e.to_string()))?;
        }

        for (i, Round { r, .. }) in rounds.iter().copied().enumerate() {
            let (evaluated, stopped) = self.run_round(&current, r, bracket_id)?;
            let mut round_log = RoundLog {
                r,
                evaluated: evaluated.clone(),
                kept: Vec::new(),
                revived: Vec::new(),
            };
            if stopped {
                log.rounds.push(round_log);
                log.status = BracketStatus::Stopped;
                return Ok(log);
            }
            let Some(next) = rounds.get(i + 1) else {
                log.rounds.push(round_log);
                break;
            };
            let local: Vec<(ConfigId, f64)> = evaluated
                .iter()
                .map(|&id| (id, self.ranking_metric(id, r)))
                .collect();
            let selection = self.select(&local, r, next.n as usize)?;
            for k in &selection.keep {
                if k.revived {
                    self.store.set_origin(k.id, Origin::Revived);
                    self.counters.revivals += 1;
                    round_log.revived.push(k.id);
                }
            }
            current = selection.keep.iter().map(|k| k.id).collect();
            round_log.kept = current.clone();
            log.rounds.push(round_log);
        }
        Ok(log)
    }

    fn ranking_metric(&self, id: ConfigId, r: u32) -> f64 {
        if self.store.is_failed(id) {
            return f64::INFINITY;
        }
        self.store.metric_at(id, r).unwrap_or(f64::INFINITY)
    }

    fn select(&mut self, local: &[(ConfigId, f64)], r: u32, n_keep: usize) -> Result<Selection> {
        let n_keep = n_keep.min(local.len());
        match &self.config.selection {
            SelectionMode::Sh => Ok(sh_select(local, n_keep)),
            SelectionMode::Glosh { lambda } => {
                let archived: Vec<(ConfigId, f64)> = self
                    .store
                    .archive()
                    .level(r)
                    .into_iter()
                    .filter(|(id, _)| !self.store.is_failed(*id))
                    .collect();
                let selection = glosh_select(local, &archived, n_keep, lambda.get(r), &mut self.glosh_rng)?;
                self.store
                    .archive_mut()
                    .replace_level(r, selection.archive.iter().copied());
                Ok(selection)
            }
        }
    }

    /// Trains each configuration from its current resource to `target`.
    /// Returns the configurations evaluated and whether the run stopped.
    fn run_round(&mut self, ids: &[ConfigId], target: u32, bracket_id: u32) -> Result<(Vec<ConfigId>, bool)> {
        let mut slots = WorkerSlots::new(self.config.workers, self.clock.now());
        let mut pending: Vec<Measurement> = Vec::new();
        let mut evaluated = Vec::with_capacity(ids.len());
        let mut stopped = false;
        let no_checkpoints: &[u32] = &[];
        for &id in ids {
            let (slot, start) = slots.next();
            if self.config.max_evaluations.is_some_and(|m| self.counters.evaluations >= m)
                || self.config.time_limit.is_some_and(|t| start >= t)
            {
                stopped = true;
                break;
            }
            let from = self.store.trained_resource(id);
            if from >= target {
                // already measured here, e.g. a replayed configuration
                evaluated.push(id);
                continue;
            }
            let checkpoints = if self.config.fgf.is_off() {
                no_checkpoints
            } else {
                &self.config.checkpoints
            };
            let report_at = fgf_schedule(from, target, &self.config.fgf, checkpoints);
            let config = self.store.config(id).expect("registered").clone();
            let request = EvaluationRequest::new(&config, from, target, report_at);
            self.counters.evaluations += 1;
            evaluated.push(id);
            match self.evaluator.evaluate(&request) {
                Ok(reports) => {
                    self.counters.training_units += (target - from) as u64;
                    let mut finish = start;
                    for rep in reports {
                        finish = start + rep.elapsed;
                        pending.push(Measurement {
                            config_id: id,
                            resource: rep.resource,
                            metric: rep.metric,
                            virtual_time: finish,
                            bracket_id,
                            is_checkpoint: self.config.checkpoints.contains(&rep.resource),
                        });
                    }
                    slots.occupy(slot, finish);
                }
                Err(e) => {
                    warn!("configuration {id} failed between {from} and {target}: {e}");
                    self.store.mark_failed(id);
                    self.counters.failures += 1;
                }
            }
        }
        // with several workers, reports complete out of order
        pending.sort_by(|a, b| a.virtual_time.total_cmp(&b.virtual_time));
        for m in pending {
            self.store.record(m).map_err(|e| SchedError::Store(e.to_string()))?;
            self.counters.measurements += 1;
        }
        self.clock.advance_to(slots.drained());
        Ok((evaluated, stopped))
    }
}
