//! Resource allocation: successive-halving geometry, global ranking with
//! revival, HyperBand plans, rank-correlation driven bracket substitution and
//! the fine-grained measurement schedule.

mod brackets;
mod fgf;
mod flexband;
mod glosh;
mod kendall;
mod runner;

use thiserror::Error;

pub use brackets::{
    all_explore, all_exploit, bracket_budget, checkpoint_levels, hb_brackets, s_max, sh_rounds, BracketMode, BracketPlan,
    BracketSpec, Provenance, Round,
};
pub use fgf::{fgf_schedule, FgfMode};
pub use flexband::{entry_taus, flexband_adjust, flexband_adjust_with_taus, FlexbandOutcome, FlexbandParams, Substitution};
pub use glosh::{glosh_select, sh_select, Kept, LambdaSchedule, Selection};
pub use kendall::kendall_tau;
pub use runner::{BracketLog, BracketRunner, BracketStatus, Counters, RoundLog, RunnerConfig, SelectionMode};

#[derive(Debug, Error, PartialEq)]
pub enum SchedError {
    #[error("invalid geometry: R = {r_max} must be a power of eta = {eta} >= 2 with R >= eta")]
    InvalidGeometry { r_max: u32, eta: u32 },
    #[error("no preset arrangement for R = {r_max}, eta = {eta}")]
    NoPreset { r_max: u32, eta: u32 },
    #[error("invalid bracket n0 = {n0}, r0 = {r0} for R = {r_max}")]
    InvalidBracket { n0: u32, r0: u32, r_max: u32 },
    #[error("lambda {lambda} at level {r} outside [0, 1]")]
    InvalidLambda { r: u32, lambda: f64 },
    #[error("lambda decreases at level {r}")]
    DecreasingLambda { r: u32 },
    #[error("nothing to select from")]
    EmptySelection,
    #[error("cannot keep {n_keep} of {local} local entries")]
    KeepExceedsLocal { n_keep: usize, local: usize },
    #[error("rank correlation needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("expected {expected} configurations for the bracket, got {got}")]
    ConfigCount { expected: usize, got: usize },
    #[error("store rejected a measurement: {0}")]
    Store(String),
}

pub type Result<T> = std::result::Result<T, SchedError>;
