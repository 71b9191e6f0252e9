//! Pair classification between two paired sequences in `O(n log n)`
//! (Knight's merge-sort method).

use std::cmp::Ordering;

/// Counts over the `n(n-1)/2` unordered pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Tied in the first sequence only.
    pub tied_first: u64,
    /// Tied in the second sequence only.
    pub tied_second: u64,
    pub tied_both: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.concordant + self.discordant + self.tied_first + self.tied_second + self.tied_both
    }
}

fn tie_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], same: F) -> u64 {
    let mut pairs = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
    }
    pairs + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Classifies every unordered pair `{j, k}` by comparing `a_j` vs `a_k` and
/// `b_j` vs `b_k`. Panics if lengths differ.
pub fn pair_counts(a: &[f64], b: &[f64]) -> PairCounts {
    assert_eq!(a.len(), b.len(), "paired sequences must have equal length");
    let n = a.len() as u64;
    // `+ 0.0` folds -0.0 into 0.0 so total_cmp agrees with `==`
    let mut pairs: Vec<(f64, f64)> = a.iter().zip(b).map(|(x, y)| (x + 0.0, y + 0.0)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let tied_a = tie_pairs(&pairs, |x, y| x.0 == y.0);
    let tied_ab = tie_pairs(&pairs, |x, y| x.0 == y.0 && x.1 == y.1);
    let mut second: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = merge_count(&mut second, &mut Vec::with_capacity(pairs.len()));
    let tied_b = tie_pairs(&second, |x, y| x == y);
    let all = n * n.saturating_sub(1) / 2;
    let tied_any = tied_a + tied_b - tied_ab;
    PairCounts {
        concordant: all - discordant - tied_any,
        discordant,
        tied_first: tied_a - tied_ab,
        tied_second: tied_b - tied_ab,
        tied_both: tied_ab,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(a: &[f64], b: &[f64]) -> PairCounts {
        let mut c = PairCounts::default();
        for j in 0..a.len() {
            for k in j + 1..a.len() {
                let (da, db) = (a[j] - a[k], b[j] - b[k]);
                match (da == 0.0, db == 0.0) {
                    (true, true) => c.tied_both += 1,
                    (true, false) => c.tied_first += 1,
                    (false, true) => c.tied_second += 1,
                    _ if (da > 0.0) == (db > 0.0) => c.concordant += 1,
                    _ => c.discordant += 1,
                }
            }
        }
        c
    }

    #[test]
    fn small_cases() {
        assert_eq!(pair_counts(&[], &[]), PairCounts::default());
        assert_eq!(pair_counts(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]), brute(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            v in proptest::collection::vec((0u8..6, 0u8..6), 0..40)
        ) {
            let a: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            let fast = pair_counts(&a, &b);
            prop_assert_eq!(fast, brute(&a, &b));
            let n = a.len() as u64;
            prop_assert_eq!(fast.total(), n * n.saturating_sub(1) / 2);
        }
    }
}
