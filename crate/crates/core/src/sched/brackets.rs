use serde::{Deserialize, Serialize};

use super::{Result, SchedError};

/// How the per-bracket configuration counts are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BracketMode {
    /// `n = ceil((s_max + 1) η^s / (s + 1))`.
    #[default]
    Formula,
    /// The published R = 81, η = 3 arrangement.
    TablePreset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Hyperband,
    TablePreset,
    FlexbandAdjusted,
    AllExplore,
    AllExploit,
}

/// One successive-halving round: `n` configurations trained to resource `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub n: u32,
    pub r: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub n0: u32,
    pub r0: u32,
}

impl BracketSpec {
    pub fn new(n0: u32, r0: u32) -> Self {
        Self { n0, r0 }
    }

    pub fn rounds(&self, r_max: u32, eta: u32) -> Result<Vec<Round>> {
        sh_rounds(self.n0, self.r0, r_max, eta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketPlan {
    pub brackets: Vec<BracketSpec>,
    pub provenance: Provenance,
    pub r_max: u32,
    pub eta: u32,
}

impl BracketPlan {
    pub fn n(&self) -> Vec<u32> {
        self.brackets.iter().map(|b| b.n0).collect()
    }

    pub fn r(&self) -> Vec<u32> {
        self.brackets.iter().map(|b| b.r0).collect()
    }

    pub fn len(&self) -> usize {
        self.brackets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.brackets.is_empty()
    }
}

/// Largest `s` with `η^s <= R`, requiring `R` to be an exact power of `η`.
pub fn s_max(r_max: u32, eta: u32) -> Result<u32> {
    if eta < 2 || r_max < eta {
        return Err(SchedError::InvalidGeometry { r_max, eta });
    }
    let mut s = 0;
    let mut p = 1u64;
    while p * (eta as u64) <= r_max as u64 {
        p *= eta as u64;
        s += 1;
    }
    if p != r_max as u64 {
        return Err(SchedError::InvalidGeometry { r_max, eta });
    }
    Ok(s)
}

/// HyperBand arrangement for one outer loop, most exploring bracket first.
pub fn hb_brackets(r_max: u32, eta: u32, mode: BracketMode) -> Result<BracketPlan> {
    let s_max = s_max(r_max, eta)?;
    let brackets = match mode {
        BracketMode::Formula => (0..=s_max)
            .rev()
            .map(|s| {
                let pow = (eta as u64).pow(s);
                let num = (s_max as u64 + 1) * pow;
                let n = num.div_ceil(s as u64 + 1) as u32;
                BracketSpec::new(n, r_max / pow as u32)
            })
            .collect(),
        BracketMode::TablePreset => {
            if (r_max, eta) != (81, 3) {
                return Err(SchedError::NoPreset { r_max, eta });
            }
            [(81, 1), (27, 3), (9, 9), (6, 27), (5, 81)]
                .into_iter()
                .map(|(n, r)| BracketSpec::new(n, r))
                .collect()
        }
    };
    Ok(BracketPlan {
        brackets,
        provenance: match mode {
            BracketMode::Formula => Provenance::Hyperband,
            BracketMode::TablePreset => Provenance::TablePreset,
        },
        r_max,
        eta,
    })
}

/// `s_max + 1` copies of the most exploring bracket.
pub fn all_explore(r_max: u32, eta: u32, mode: BracketMode) -> Result<BracketPlan> {
    let mut plan = hb_brackets(r_max, eta, mode)?;
    plan.brackets = vec![plan.brackets[0]; plan.len()];
    plan.provenance = Provenance::AllExplore;
    Ok(plan)
}

/// `s_max + 1` copies of the most exploiting bracket.
pub fn all_exploit(r_max: u32, eta: u32, mode: BracketMode) -> Result<BracketPlan> {
    let mut plan = hb_brackets(r_max, eta, mode)?;
    plan.brackets = vec![*plan.brackets.last().expect("non-empty"); plan.len()];
    plan.provenance = Provenance::AllExploit;
    Ok(plan)
}

/// Successive-halving rounds: `r` grows by `η` while it stays within `R`,
/// `n` shrinks to `max(1, floor(n / η))`.
pub fn sh_rounds(n0: u32, r0: u32, r_max: u32, eta: u32) -> Result<Vec<Round>> {
    if eta < 2 {
        return Err(SchedError::InvalidGeometry { r_max, eta });
    }
    if n0 == 0 || r0 == 0 || r0 > r_max {
        return Err(SchedError::InvalidBracket { n0, r0, r_max });
    }
    let mut rounds = vec![Round { n: n0, r: r0 }];
    loop {
        let last = *rounds.last().expect("non-empty");
        let r = last.r as u64 * eta as u64;
        if r > r_max as u64 {
            break;
        }
        rounds.push(Round {
            n: (last.n / eta).max(1),
            r: r as u32,
        });
    }
    Ok(rounds)
}

/// The resources at which successive halving makes decisions: `R η^{-s}` for
/// `s = s_max..0`.
pub fn checkpoint_levels(r_max: u32, eta: u32) -> Result<Vec<u32>> {
    let s = s_max(r_max, eta)?;
    Ok((0..=s).rev().map(|k| r_max / eta.pow(k)).collect())
}

/// Total training units of a bracket with incremental training.
pub fn bracket_budget(rounds: &[Round]) -> u64 {
    let mut prev = 0u64;
    rounds
        .iter()
        .map(|round| {
            let units = round.n as u64 * (round.r as u64 - prev);
            prev = round.r as u64;
            units
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rounds(v: &[(u32, u32)]) -> Vec<Round> {
        v.iter().map(|&(n, r)| Round { n, r }).collect()
    }

    #[test]
    fn hyperband_plans() {
        let p = hb_brackets(81, 3, BracketMode::Formula).unwrap();
        assert_eq!(p.n(), vec![81, 34, 15, 8, 5]);
        assert_eq!(p.r(), vec![1, 3, 9, 27, 81]);
        let p = hb_brackets(27, 3, BracketMode::Formula).unwrap();
        assert_eq!(p.n(), vec![27, 12, 6, 4]);
        assert_eq!(p.r(), vec![1, 3, 9, 27]);
        let p = hb_brackets(81, 3, BracketMode::TablePreset).unwrap();
        assert_eq!(p.n(), vec![81, 27, 9, 6, 5]);
        assert_eq!(p.r(), vec![1, 3, 9, 27, 81]);
        assert_eq!(p.provenance, Provenance::TablePreset);
    }

    #[test]
    fn invalid_geometry() {
        assert!(hb_brackets(2, 3, BracketMode::Formula).is_err());
        assert!(hb_brackets(27, 1, BracketMode::Formula).is_err());
        assert!(hb_brackets(50, 3, BracketMode::Formula).is_err());
        assert!(hb_brackets(27, 3, BracketMode::TablePreset).is_err());
        assert!(sh_rounds(3, 28, 27, 3).is_err());
    }

    #[test]
    fn successive_halving_rounds() {
        assert_eq!(sh_rounds(27, 1, 27, 3).unwrap(), rounds(&[(27, 1), (9, 3), (3, 9), (1, 27)]));
        assert_eq!(sh_rounds(27, 3, 81, 3).unwrap(), rounds(&[(27, 3), (9, 9), (3, 27), (1, 81)]));
        assert_eq!(sh_rounds(5, 81, 81, 3).unwrap(), rounds(&[(5, 81)]));
        assert_eq!(sh_rounds(6, 27, 81, 3).unwrap(), rounds(&[(6, 27), (2, 81)]));
        for r in sh_rounds(1, 1, 81, 3).unwrap() {
            assert_eq!(r.n, 1);
        }
    }

    #[test]
    fn budget_of_the_27_bracket() {
        let r = sh_rounds(27, 1, 27, 3).unwrap();
        assert_eq!(bracket_budget(&r), 27 + 9 * 2 + 3 * 6 + 18);
    }

    #[test]
    fn bracket_costs_are_within_a_factor_eta() {
        for r_max in [27, 81] {
            let plan = hb_brackets(r_max, 3, BracketMode::Formula).unwrap();
            let costs: Vec<u64> = plan
                .brackets
                .iter()
                .map(|b| {
                    let rounds = b.rounds(r_max, 3).unwrap();
                    rounds.iter().map(|x| x.n as u64 * x.r as u64).sum()
                })
                .collect();
            let lo = *costs.iter().min().unwrap();
            let hi = *costs.iter().max().unwrap();
            assert!(hi <= 3 * lo, "{costs:?}");
        }
    }

    #[test]
    fn explore_and_exploit_plans() {
        let e = all_explore(27, 3, BracketMode::Formula).unwrap();
        assert_eq!(e.n(), vec![27; 4]);
        assert_eq!(e.r(), vec![1; 4]);
        let x = all_exploit(27, 3, BracketMode::Formula).unwrap();
        assert_eq!(x.n(), vec![4; 4]);
        assert_eq!(x.r(), vec![27; 4]);
        assert_eq!(checkpoint_levels(81, 3).unwrap(), vec![1, 3, 9, 27, 81]);
    }
}
