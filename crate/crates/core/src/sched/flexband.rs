use serde::{Deserialize, Serialize};

use super::brackets::{BracketPlan, BracketSpec, Provenance};
use super::kendall::kendall_tau;
use crate::records::FidelityDatasets;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlexbandParams {
    pub k_thres: f64,
    /// Minimum dataset size at every bracket-entry fidelity before adjusting.
    pub warmup: usize,
}

impl Default for FlexbandParams {
    fn default() -> Self {
        Self {
            k_thres: 0.55,
            warmup: 25,
        }
    }
}

/// Outcome for bracket `j`, judged on the rank correlation between the entry
/// fidelities of brackets `j - 1` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub bracket: usize,
    pub r_low: u32,
    pub r_high: u32,
    pub tau: Option<f64>,
    pub substituted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexbandOutcome {
    pub plan: BracketPlan,
    pub warmed_up: bool,
    pub decisions: Vec<Substitution>,
}

/// Applies substitutions for given correlations: `taus[j - 1]` belongs to
/// the entry fidelities of brackets `j - 1` and `j`. Walking `j` from the
/// last bracket down, a correlation above `k_thres` replaces bracket `j`
/// with the original bracket `j - 1`.
pub fn flexband_adjust_with_taus(plan: &BracketPlan, taus: &[Option<f64>], k_thres: f64) -> FlexbandOutcome {
    let original = &plan.brackets;
    let mut adjusted: Vec<BracketSpec> = original.clone();
    let mut decisions = Vec::new();
    for j in (1..original.len()).rev() {
        let tau = taus.get(j - 1).copied().flatten();
        let substituted = tau.is_some_and(|t| t > k_thres);
        if substituted {
            adjusted[j] = original[j - 1];
        }
        decisions.push(Substitution {
            bracket: j,
            r_low: original[j - 1].r0,
            r_high: original[j].r0,
            tau,
            substituted,
        });
    }
    decisions.reverse();
    let changed = adjusted != *original;
    FlexbandOutcome {
        plan: BracketPlan {
            brackets: adjusted,
            provenance: if changed {
                Provenance::FlexbandAdjusted
            } else {
                plan.provenance
            },
            r_max: plan.r_max,
            eta: plan.eta,
        },
        warmed_up: true,
        decisions,
    }
}

/// Rank correlations between adjacent bracket-entry fidelities, measured on
/// configurations observed at both.
pub fn entry_taus(plan: &BracketPlan, datasets: &FidelityDatasets) -> Vec<Option<f64>> {
    plan.brackets
        .windows(2)
        .map(|w| {
            let pairs = datasets.paired_metrics(w[0].r0, w[1].r0);
            kendall_tau(&pairs).ok()
        })
        .collect()
}

pub fn flexband_adjust(plan: &BracketPlan, datasets: &FidelityDatasets, params: &FlexbandParams) -> FlexbandOutcome {
    let smallest = plan
        .brackets
        .iter()
        .map(|b| datasets.level(b.r0).len())
        .min()
        .unwrap_or(0);
    if smallest < params.warmup {
        return FlexbandOutcome {
            plan: plan.clone(),
            warmed_up: false,
            decisions: Vec::new(),
        };
    }
    flexband_adjust_with_taus(plan, &entry_taus(plan, datasets), params.k_thres)
}
