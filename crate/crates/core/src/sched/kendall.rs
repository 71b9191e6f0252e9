use super::{Result, SchedError};
use crate::rank::pair_counts;

/// Kendall tau-a over paired metrics: `(concordant - discordant) / C(n, 2)`;
/// pairs tied in either coordinate count as neither.
pub fn kendall_tau(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(SchedError::TooFewPairs(pairs.len()));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let c = pair_counts(&a, &b);
    Ok((c.concordant as f64 - c.discordant as f64) / c.total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len();
        let (mut c, mut d) = (0i64, 0i64);
        for j in 0..n {
            for k in j + 1..n {
                let s = (pairs[j].0 - pairs[k].0) * (pairs[j].1 - pairs[k].1);
                if s > 0.0 {
                    c += 1;
                } else if s < 0.0 {
                    d += 1;
                }
            }
        }
        (c - d) as f64 / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn examples() {
        let same = [(1.0, 10.0), (2.0, 20.0), (3.0, 30.0)];
        assert_eq!(kendall_tau(&same).unwrap(), 1.0);
        let rev = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)];
        assert_eq!(kendall_tau(&rev).unwrap(), -1.0);
        let mixed = [(1.0, 1.0), (2.0, 3.0), (3.0, 2.0)];
        assert!((kendall_tau(&mixed).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(kendall_tau(&[(1.0, 1.0)]).is_err());
        // a tie is neither concordant nor discordant but stays in the denominator
        assert_eq!(kendall_tau(&[(1.0, 1.0), (1.0, 2.0)]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(v in proptest::collection::vec((0u8..10, 0u8..10), 2..50)) {
            let pairs: Vec<(f64, f64)> = v.iter().map(|&(a, b)| (a as f64, b as f64)).collect();
            prop_assert!((kendall_tau(&pairs).unwrap() - brute(&pairs)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_monotone_maps(v in proptest::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 2..40)) {
            let base = kendall_tau(&v).unwrap();
            let mapped: Vec<(f64, f64)> = v.iter().map(|&(a, b)| (a.exp(), b * b * b + b)).collect();
            prop_assert_eq!(kendall_tau(&mapped).unwrap(), base);
        }
    }
}
