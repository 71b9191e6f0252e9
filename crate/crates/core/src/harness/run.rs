use std::collections::BTreeMap;
use std::sync::Arc;

use log::{debug, info};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BenchmarkSpec, Composition, EnsembleLevels, ExperimentConfig, PlanKind};
use super::Result;
use crate::bench::{Benchmark, TabularBenchmark, ToyBenchmark};
use crate::ensemble::{EnsembleParams, EnsembleState, Proposer, WeightLog};
use crate::exec::{Evaluator, InprocEvaluator, SubprocessEvaluator};
use crate::records::{IncumbentTrajectory, RunMeta, RunStore};
use crate::sched::{
    all_explore, all_exploit, checkpoint_levels, flexband_adjust, hb_brackets, BracketLog, BracketPlan, BracketRunner,
    BracketSpec, BracketStatus, Counters, FlexbandOutcome, LambdaSchedule, RunnerConfig, SelectionMode,
};
use crate::seeding::{derive_seed, stream_rng, Stream};
use crate::space::{ConfigId, ConfigSpace, Configuration};

/// Arrangement used for one outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLog {
    pub outer_loop: usize,
    pub plan: BracketPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flexband: Option<FlexbandOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub store: RunStore,
    pub counters: Counters,
    pub plans: Vec<PlanLog>,
    pub brackets: Vec<BracketLog>,
    pub weights: WeightLog,
    pub elapsed_vtime: f64,
}

impl RunResult {
    pub fn trajectory(&self) -> &IncumbentTrajectory {
        self.store.trajectory()
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.store.incumbent().map(|(_, y)| y)
    }

    pub fn dataset_sizes(&self) -> BTreeMap<u32, usize> {
        self.store.dataset_sizes()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            method: self.method.clone(),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            final_metric: self.final_metric(),
            incumbent: self.store.incumbent().map(|(id, _)| id),
            dataset_sizes: self.dataset_sizes(),
            counters: self.counters,
            elapsed_vtime: self.elapsed_vtime,
            configurations: self.store.num_configs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub final_metric: Option<f64>,
    pub incumbent: Option<ConfigId>,
    pub dataset_sizes: BTreeMap<u32, usize>,
    pub counters: Counters,
    pub elapsed_vtime: f64,
    pub configurations: usize,
}

struct Setup {
    space: ConfigSpace,
    r_max: u32,
    bench: Option<Arc<dyn Benchmark>>,
    evaluator: Box<dyn Evaluator>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let bench: Arc<dyn Benchmark> = match &cfg.benchmark {
        BenchmarkSpec::Toy(spec) => Arc::new(ToyBenchmark::new(*spec, cfg.seed)),
        BenchmarkSpec::Tabular { path } => Arc::new(TabularBenchmark::load(path, cfg.seed)?),
        BenchmarkSpec::Synthetic(spec) => Arc::new(TabularBenchmark::synthetic(spec)),
        BenchmarkSpec::Subprocess {
            command,
            space,
            r_max,
            checkpoint_root,
        } => {
            let space = ConfigSpace::from_json_value(space.clone())?;
            let root = checkpoint_root.clone().unwrap_or_else(|| {
                std::env::temp_dir().join(format!("flexhb-checkpoints-{}-{}", std::process::id(), cfg.seed))
            });
            let evaluator = SubprocessEvaluator::new(command, root)?;
            return Ok(Setup {
                space,
                r_max: cfg.r_max.unwrap_or(*r_max),
                bench: None,
                evaluator: Box::new(evaluator),
            });
        }
    };
    Ok(Setup {
        space: bench.space().clone(),
        r_max: cfg.r_max.unwrap_or(bench.max_resource()),
        evaluator: Box::new(InprocEvaluator::new(bench.clone())),
        bench: Some(bench),
    })
}

struct Sampler<'a> {
    cfg: &'a ExperimentConfig,
    comp: &'a Composition,
    params: EnsembleParams,
    bench: Option<Arc<dyn Benchmark>>,
    checkpoints: Vec<u32>,
    r_max: u32,
    sampling_rng: ChaCha8Rng,
    model_rng: ChaCha8Rng,
    next_id: u64,
    fits: u64,
    weights: WeightLog,
}

impl Sampler<'_> {
    fn fit(&mut self, store: &RunStore) -> Result<Option<EnsembleState>> {
        if self.comp.model.is_none() || self.params.p_random >= 1.0 {
            return Ok(None);
        }
        let all = store.datasets();
        let datasets = match self.comp.model.expect("checked") {
            EnsembleLevels::Top => all.restrict(|r| r == self.r_max),
            EnsembleLevels::Checkpoints => all.restrict(|r| self.checkpoints.contains(&r)),
            EnsembleLevels::All => all,
        };
        let seed = derive_seed(self.cfg.seed, &[Stream::Model as u64, self.fits]);
        self.fits += 1;
        let state = EnsembleState::fit(&datasets, &self.params, seed)?;
        if let Some(s) = &state {
            self.weights.push(&s.weights());
        }
        Ok(state)
    }

    /// `n` proposals for one bracket, fitting the ensemble at most once.
    fn propose(&mut self, n: u32, runner: &mut BracketRunner<'_>) -> Result<Vec<Configuration>> {
        let mut ensemble: Option<Option<EnsembleState>> = None;
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            runner.clock.advance(self.cfg.proposal_overhead);
            let id = ConfigId(self.next_id);
            self.next_id += 1;
            if ensemble.is_none() {
                ensemble = Some(self.fit(&runner.store)?);
            }
            let space = runner.store.space();
            let proposer = Proposer {
                space,
                params: &self.params,
                ensemble: ensemble.as_ref().and_then(|e| e.as_ref()),
                admissible: self.bench.as_ref().and_then(|b| b.admissible()),
            };
            let config = proposer.propose(id, &mut self.sampling_rng, &mut self.model_rng);
            out.push(match &self.bench {
                Some(b) => b.snap(config),
                None => config,
            });
        }
        Ok(out)
    }
}

fn base_plan(comp: &Composition, cfg: &ExperimentConfig, r_max: u32) -> Result<BracketPlan> {
    Ok(match comp.plan {
        PlanKind::Hyperband | PlanKind::FullFidelity => hb_brackets(r_max, cfg.eta, cfg.bracket_mode)?,
        PlanKind::AllExplore => all_explore(r_max, cfg.eta, cfg.bracket_mode)?,
        PlanKind::AllExploit => all_exploit(r_max, cfg.eta, cfg.bracket_mode)?,
    })
}

/// Runs one experiment to its time, evaluation or loop limit.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    let comp = cfg.resolve()?;
    let Setup {
        space,
        r_max,
        bench,
        mut evaluator,
    } = setup(cfg)?;
    let checkpoints = checkpoint_levels(r_max, cfg.eta)?;
    let selection = if comp.glosh {
        let below: Vec<u32> = checkpoints.iter().copied().filter(|&r| r < r_max).collect();
        let lambda = cfg.lambda.clone().unwrap_or_else(|| LambdaSchedule::default_for(&below));
        lambda.validate()?;
        SelectionMode::Glosh { lambda }
    } else {
        SelectionMode::Sh
    };
    let store = RunStore::new(space, r_max).with_meta(RunMeta {
        seed: cfg.seed,
        method: cfg.method.name(),
    });
    let runner_cfg = RunnerConfig {
        r_max,
        eta: cfg.eta,
        fgf: comp.fgf.clone(),
        selection,
        checkpoints: checkpoints.clone(),
        workers: cfg.workers,
        time_limit: cfg.time_limit,
        max_evaluations: cfg.max_evaluations,
    };
    let mut runner = BracketRunner::new(runner_cfg, store, evaluator.as_mut(), stream_rng(cfg.seed, Stream::Glosh));
    let mut sampler = Sampler {
        cfg,
        comp: &comp,
        params: EnsembleParams {
            top_weight: comp.top_weight,
            ..cfg.ensemble.clone()
        },
        bench,
        checkpoints,
        r_max,
        sampling_rng: stream_rng(cfg.seed, Stream::Sampling),
        model_rng: stream_rng(cfg.seed, Stream::Model),
        next_id: 0,
        fits: 0,
        weights: WeightLog::default(),
    };
    let mut plans = Vec::new();
    let mut brackets = Vec::new();

    'outer: for outer_loop in 0.. {
        if cfg.max_outer_loops.is_some_and(|m| outer_loop >= m) || runner.exhausted() {
            break;
        }
        let specs: Vec<BracketSpec> = if comp.plan == PlanKind::FullFidelity {
            vec![BracketSpec::new(1, r_max)]
        } else {
            let base = base_plan(&comp, cfg, r_max)?;
            let (plan, flexband) = if comp.flexband {
                let outcome = flexband_adjust(&base, &runner.store.datasets(), &cfg.flexband_params);
                debug!("outer loop {outer_loop}: flexband {:?}", outcome.decisions);
                (outcome.plan.clone(), Some(outcome))
            } else {
                (base, None)
            };
            let specs = plan.brackets.clone();
            plans.push(PlanLog {
                outer_loop,
                plan,
                flexband,
            });
            specs
        };
        for spec in specs {
            if runner.exhausted() {
                break 'outer;
            }
            let configs = sampler.propose(spec.n0, &mut runner)?;
            let log = runner.run_bracket(spec, configs)?;
            let stopped = log.status == BracketStatus::Stopped;
            brackets.push(log);
            if stopped {
                break 'outer;
            }
        }
    }
    info!(
        "{} seed {}: {} evaluations, final {:?}",
        cfg.method.name(),
        cfg.seed,
        runner.counters.evaluations,
        runner.store.incumbent()
    );
    Ok(RunResult {
        method: cfg.method.name(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        counters: runner.counters,
        elapsed_vtime: runner.clock.now(),
        store: runner.store,
        plans,
        brackets,
        weights: sampler.weights,
    })
}
