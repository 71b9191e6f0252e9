use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::records::IncumbentTrajectory;

/// One method's runs, as (seed, trajectory) pairs.
pub type MethodRuns = Vec<(u64, IncumbentTrajectory)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub runs: usize,
    pub mean_final: f64,
    pub time_to_target: Option<f64>,
    /// `None` prints as `F`: the mean curve never reached the target.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub target: f64,
    pub rows: Vec<MethodRow>,
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mut out = format!("reference {} target {:.6}\n", self.reference, self.target);
        out.push_str("method\truns\tmean_final\ttime_to_target\tspeedup\n");
        for row in &self.rows {
            let ttt = row.time_to_target.map_or("-".to_string(), |t| format!("{t:.2}"));
            let speedup = row.speedup.map_or("F".to_string(), |s| format!("{s:.2}"));
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\n",
                row.method, row.runs, row.mean_final, ttt, speedup
            ));
        }
        out
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn final_value(t: &IncumbentTrajectory) -> f64 {
    t.last().map_or(f64::INFINITY, |p| p.best_metric)
}

/// Mean incumbent curve, evaluated on the union of change points. Defined
/// only from the time every run has an incumbent.
pub fn mean_curve(runs: &[&IncumbentTrajectory]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = runs.iter().flat_map(|t| t.points().iter().map(|p| p.vtime)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .filter_map(|t| {
            let vals: Option<Vec<f64>> = runs.iter().map(|r| r.value_at(t)).collect();
            vals.map(|v| (t, v.iter().sum::<f64>() / v.len() as f64))
        })
        .collect()
}

pub fn curve_time_to_target(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    curve.iter().find(|(_, y)| *y <= target).map(|(t, _)| *t)
}

/// Target is the reference's mean final incumbent; each method's time is
/// the first time its mean curve reaches it.
pub fn compare(runs: &BTreeMap<String, MethodRuns>, reference: &str) -> Result<Comparison> {
    if runs.is_empty() {
        return Err(HarnessError::MissingRuns);
    }
    let reference_runs = runs
        .get(reference)
        .filter(|r| !r.is_empty())
        .ok_or_else(|| HarnessError::MissingReference(reference.to_string()))?;
    let mean_final = |rs: &MethodRuns| rs.iter().map(|(_, t)| final_value(t)).sum::<f64>() / rs.len() as f64;
    let target = mean_final(reference_runs);
    let ttt = |rs: &MethodRuns| {
        let curves: Vec<&IncumbentTrajectory> = rs.iter().map(|(_, t)| t).collect();
        curve_time_to_target(&mean_curve(&curves), target)
    };
    let reference_time = ttt(reference_runs);
    let rows = runs
        .iter()
        .filter(|(_, rs)| !rs.is_empty())
        .map(|(method, rs)| {
            let time_to_target = ttt(rs);
            let speedup = match (reference_time, time_to_target) {
                (Some(r), Some(m)) if m > 0.0 => Some(r / m),
                _ => None,
            };
            MethodRow {
                method: method.clone(),
                runs: rs.len(),
                mean_final: mean_final(rs),
                time_to_target,
                speedup,
            }
        })
        .collect();
    Ok(Comparison {
        reference: reference.to_string(),
        target,
        rows,
    })
}
