use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Where measurements are taken while training from one resource to the next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FgfMode {
    /// Only at successive-halving decision points.
    #[default]
    Off,
    /// Every `g` resource units, plus decision points.
    Every { g: u32 },
    /// A fixed level set, used verbatim.
    Explicit { levels: Vec<u32> },
}

impl FgfMode {
    pub fn is_off(&self) -> bool {
        matches!(self, FgfMode::Off)
    }
}

/// Sorted resources to measure while training over `(r_from, r_to]`.
/// `r_to` is always included.
pub fn fgf_schedule(r_from: u32, r_to: u32, mode: &FgfMode, checkpoints: &[u32]) -> Vec<u32> {
    let in_range = |r: &u32| *r > r_from && *r <= r_to;
    let mut out: BTreeSet<u32> = BTreeSet::from([r_to]);
    match mode {
        FgfMode::Off => out.extend(checkpoints.iter().copied().filter(in_range)),
        FgfMode::Every { g } => {
            let g = (*g).max(1);
            out.extend((r_from / g + 1..=r_to / g).map(|k| k * g));
            out.extend(checkpoints.iter().copied().filter(in_range));
        }
        FgfMode::Explicit { levels } => out.extend(levels.iter().copied().filter(in_range)),
    }
    out.into_iter().collect()
}
