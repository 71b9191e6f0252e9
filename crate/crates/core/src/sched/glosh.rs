use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SchedError};
use crate::space::ConfigId;

/// Revival probability per early-stopping resource level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LambdaSchedule(pub BTreeMap<u32, f64>);

impl LambdaSchedule {
    /// `λ_k = 1 / (m - k)` over the `m` decision levels below `R`, giving
    /// (1/3, 1/2, 1) for R = 27 and (1/4, 1/3, 1/2, 1) for R = 81.
    pub fn default_for(levels_below_max: &[u32]) -> Self {
        let m = levels_below_max.len();
        Self(
            levels_below_max
                .iter()
                .enumerate()
                .map(|(k, &r)| (r, 1.0 / (m - k) as f64))
                .collect(),
        )
    }

    pub fn constant(levels: &[u32], lambda: f64) -> Self {
        Self(levels.iter().map(|&r| (r, lambda)).collect())
    }

    /// Zero for levels without an entry.
    pub fn get(&self, r: u32) -> f64 {
        self.0.get(&r).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for (&r, &l) in &self.0 {
            if !(0.0..=1.0).contains(&l) {
                return Err(SchedError::InvalidLambda { r, lambda: l });
            }
            if l < prev {
                return Err(SchedError::DecreasingLambda { r });
            }
            prev = l;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kept {
    pub id: ConfigId,
    pub y: f64,
    pub revived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub keep: Vec<Kept>,
    /// Everything merged but not kept; replaces the archive level.
    pub archive: Vec<(ConfigId, f64)>,
}

fn ranked(entries: &mut [(ConfigId, f64, bool)]) {
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

/// Top `n_keep` local entries by `(y, id)`.
pub fn sh_select(local: &[(ConfigId, f64)], n_keep: usize) -> Selection {
    let mut merged: Vec<(ConfigId, f64, bool)> = local.iter().map(|&(id, y)| (id, y, false)).collect();
    ranked(&mut merged);
    let (keep, rest) = merged.split_at(n_keep.min(merged.len()));
    Selection {
        keep: keep
            .iter()
            .map(|&(id, y, _)| Kept { id, y, revived: false })
            .collect(),
        archive: rest.iter().filter(|e| e.1.is_finite()).map(|&(id, y, _)| (id, y)).collect(),
    }
}

/// Global ranking over the local round and the archive of this level.
///
/// The merged pool is walked best first. Local entries are always kept;
/// each archived entry reached is kept with probability `lambda`, rolled
/// independently. The walk stops once `n_keep` entries are kept.
/// Entries with a non-finite metric never enter the archive.
pub fn glosh_select<R: Rng + ?Sized>(
    local: &[(ConfigId, f64)],
    archive: &[(ConfigId, f64)],
    n_keep: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<Selection> {
    if n_keep > 0 && local.is_empty() && archive.is_empty() {
        return Err(SchedError::EmptySelection);
    }
    if n_keep > local.len() {
        return Err(SchedError::KeepExceedsLocal {
            n_keep,
            local: local.len(),
        });
    }
    let mut merged: Vec<(ConfigId, f64, bool)> = local
        .iter()
        .map(|&(id, y)| (id, y, false))
        .chain(archive.iter().map(|&(id, y)| (id, y, true)))
        .collect();
    ranked(&mut merged);

    let mut keep = Vec::with_capacity(n_keep);
    let mut rest = Vec::with_capacity(merged.len());
    for (id, y, archived) in merged {
        let take = keep.len() < n_keep
            && (!archived
                || match lambda {
                    l if l <= 0.0 => false,
                    l if l >= 1.0 => true,
                    l => rng.random::<f64>() < l,
                });
        if take {
            keep.push(Kept { id, y, revived: archived });
        } else if y.is_finite() {
            rest.push((id, y));
        }
    }
    Ok(Selection { keep, archive: rest })
}
