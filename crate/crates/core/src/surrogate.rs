//! Probabilistic random-forest regressor over encoded configurations.
//!
//! The predictive mean is the average of per-tree leaf means and the
//! predictive variance is the spread across trees plus [`VARIANCE_FLOOR`].

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::derive_seed;

pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("need at least {needed} training points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("inputs have {x} rows but targets have {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("expected input dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite training target")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, SurrogateError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    /// Fraction of input dimensions considered at each split.
    pub feature_fraction: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 24,
            min_leaf: 3,
            bootstrap: true,
            feature_fraction: 5.0 / 6.0,
        }
    }
}

const LEAF: u32 = u32::MAX;

/// A leaf when `feature == LEAF`, with `value` as its prediction; otherwise a
/// split sending `x[feature] <= value` left.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    value: f64,
    feature: u32,
    left: u32,
    right: u32,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Self {
            value,
            feature: LEAF,
            left: 0,
            right: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while node.feature != LEAF {
            let next = if x[node.feature as usize] <= node.value { node.left } else { node.right };
            node = &self.nodes[next as usize];
        }
        node.value
    }
}

struct TreeBuilder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    min_leaf: usize,
    n_features: usize,
    features: Vec<usize>,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(mut self, mut idx: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let n = idx.len();
        self.grow(&mut idx[..n], rng);
        Tree { nodes: self.nodes }
    }

    fn grow(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::leaf(mean));
        if let Some((feature, threshold, n_left)) = self.best_split(idx, rng) {
            idx.sort_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
            let (l, r) = idx.split_at_mut(n_left);
            let left = self.grow(l, rng);
            let right = self.grow(r, rng);
            self.nodes[id] = Node {
                value: threshold,
                feature: feature as u32,
                left: left as u32,
                right: right as u32,
            };
        }
        id
    }

    /// Best variance-reducing split over a random feature subset.
    fn best_split(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64, usize)> {
        let n = idx.len();
        if n < 2 * self.min_leaf {
            return None;
        }
        let (lo, hi) = idx
            .iter()
            .map(|&i| self.ys[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        if lo == hi {
            return None;
        }
        self.features.shuffle(rng);
        let total: f64 = idx.iter().map(|&i| self.ys[i]).sum();
        let mut best: Option<(f64, usize, f64, usize)> = None;
        for k in 0..self.n_features {
            let f = self.features[k];
            idx.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let mut left_sum = 0.0;
            for split in 1..n {
                left_sum += self.ys[idx[split - 1]];
                if split < self.min_leaf || n - split < self.min_leaf {
                    continue;
                }
                let (a, b) = (self.xs[idx[split - 1]][f], self.xs[idx[split]][f]);
                if a >= b {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / split as f64 + right_sum * right_sum / (n - split) as f64;
                if best.is_none_or(|(s, ..)| score > s) {
                    best = Some((score, f, 0.5 * (a + b), split));
                }
            }
        }
        best.map(|(_, f, t, split)| (f, t, split))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    dim: usize,
    n_train: usize,
}

impl ForestModel {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], params: &ForestParams, seed: u64) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(SurrogateError::LengthMismatch {
                x: xs.len(),
                y: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(SurrogateError::InsufficientData {
                needed: 2,
                got: xs.len(),
            });
        }
        let dim = xs[0].len();
        if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
            return Err(SurrogateError::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(SurrogateError::NonFinite);
        }
        let n = xs.len();
        let n_features = ((params.feature_fraction * dim as f64).ceil() as usize).clamp(1, dim.max(1));
        let trees = (0..params.n_trees.max(1))
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[t as u64]));
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                TreeBuilder {
                    xs,
                    ys,
                    min_leaf: params.min_leaf.max(1),
                    n_features,
                    features: (0..dim).collect(),
                    nodes: Vec::new(),
                }
                .build(idx, &mut rng)
            })
            .collect();
        Ok(Self { trees, dim, n_train: n })
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Predictive `(mean, variance)`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim {
            return Err(SurrogateError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        // Welford
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, t) in self.trees.iter().enumerate() {
            let v = t.predict(x);
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let var = (m2 / self.trees.len() as f64).max(0.0);
        (mean, var + VARIANCE_FLOOR)
    }

    /// `predict` over many inputs, tree by tree; identical results.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        if let Some(bad) = xs.iter().find(|x| x.len() != self.dim) {
            return Err(SurrogateError::Dimension {
                expected: self.dim,
                got: bad.len(),
            });
        }
        Ok(self.predict_batch_unchecked(xs))
    }

    pub(crate) fn predict_batch_unchecked(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let mut acc = vec![(0.0, 0.0); xs.len()];
        for (i, t) in self.trees.iter().enumerate() {
            for ((mean, m2), x) in acc.iter_mut().zip(xs) {
                let v = t.predict(x);
                let delta = v - *mean;
                *mean += delta / (i + 1) as f64;
                *m2 += delta * (v - *mean);
            }
        }
        let n = self.trees.len() as f64;
        acc.into_iter()
            .map(|(mean, m2)| (mean, (m2 / n).max(0.0) + VARIANCE_FLOOR))
            .collect()
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.predict(x).map(|(m, _)| m)
    }
}

/// Row `j` holds the predictions, at every training input, of a forest fit
/// with point `j` left out.
pub fn loo_prediction_matrix(
    xs: &[Vec<f64>],
    ys: &[f64],
    params: &ForestParams,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if xs.len() < 3 {
        return Err(SurrogateError::InsufficientData {
            needed: 3,
            got: xs.len(),
        });
    }
    if xs.len() != ys.len() {
        return Err(SurrogateError::LengthMismatch {
            x: xs.len(),
            y: ys.len(),
        });
    }
    (0..xs.len())
        .map(|j| {
            let (sub_x, sub_y): (Vec<Vec<f64>>, Vec<f64>) = xs
                .iter()
                .zip(ys)
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, (x, y))| (x.clone(), *y))
                .unzip();
            let model = ForestModel::fit(&sub_x, &sub_y, params, derive_seed(seed, &[j as u64]))?;
            xs.iter().map(|x| model.predict_mean(x)).collect()
        })
        .collect()
}

/// Leave-one-out predictive means `μ^{-j}(x_j)`.
pub fn loo_means(xs: &[Vec<f64>], ys: &[f64], params: &ForestParams, seed: u64) -> Result<Vec<f64>> {
    Ok(loo_prediction_matrix(xs, ys, params, seed)?
        .into_iter()
        .enumerate()
        .map(|(j, row)| row[j])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect()
    }

    #[test]
    fn constant_target() {
        let xs = grid(10);
        let ys = vec![0.5; 10];
        let m = ForestModel::fit(&xs, &ys, &ForestParams::default(), 1).unwrap();
        for q in [0.0, 0.33, 0.9, 2.0] {
            let (mean, var) = m.predict(&[q]).unwrap();
            assert_eq!(mean, 0.5);
            assert!(var <= VARIANCE_FLOOR);
        }
    }

    #[test]
    fn two_clusters_match_nearest_neighbour() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..8 {
            xs.push(vec![0.01 * i as f64]);
            ys.push(0.0);
            xs.push(vec![1.0 - 0.01 * i as f64]);
            ys.push(1.0);
        }
        // nearest neighbour of 0 is in the y=0 cluster
        let nn = xs
            .iter()
            .zip(&ys)
            .min_by(|a, b| a.0[0].abs().total_cmp(&b.0[0].abs()))
            .map(|(_, y)| *y)
            .unwrap();
        assert_eq!(nn, 0.0);
        let m = ForestModel::fit(&xs, &ys, &ForestParams::default(), 3).unwrap();
        assert!(m.predict_mean(&[0.0]).unwrap() < 0.2);
    }

    #[test]
    fn deterministic_given_seed() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).fract(), (i as f64 * 0.71).fract()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * 2.0 - x[1]).collect();
        let a = ForestModel::fit(&xs, &ys, &ForestParams::default(), 42).unwrap();
        let b = ForestModel::fit(&xs, &ys, &ForestParams::default(), 42).unwrap();
        for q in &xs {
            assert_eq!(a.predict(q).unwrap(), b.predict(q).unwrap());
        }
    }

    #[test]
    fn single_tree_variance_is_the_floor() {
        let xs = grid(12);
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let p = ForestParams {
            n_trees: 1,
            ..Default::default()
        };
        let m = ForestModel::fit(&xs, &ys, &p, 0).unwrap();
        for q in [0.1, 0.5, 0.77] {
            assert_eq!(m.predict(&[q]).unwrap().1, VARIANCE_FLOOR);
        }
    }

    #[test]
    fn memorizes_noiseless_training_points() {
        let xs: Vec<Vec<f64>> = (0..25).map(|i| vec![(i as f64 * 0.618).fract(), (i as f64 * 0.414).fract()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin() + x[1]).collect();
        let p = ForestParams {
            min_leaf: 1,
            bootstrap: false,
            ..Default::default()
        };
        let m = ForestModel::fit(&xs, &ys, &p, 5).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.predict_mean(x).unwrap() - y).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_prediction_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] * 6.0).sin() + x[1]).collect();
        let m = ForestModel::fit(&xs, &ys, &ForestParams::default(), 1).unwrap();
        let queries: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random(), rng.random()]).collect();
        let batch = m.predict_batch(&queries).unwrap();
        for (q, b) in queries.iter().zip(&batch) {
            assert_eq!(m.predict(q).unwrap(), *b);
        }
        assert!(m.predict_batch(&[vec![0.0]]).is_err());
    }

    #[test]
    fn errors() {
        let p = ForestParams::default();
        assert!(matches!(
            ForestModel::fit(&[vec![0.0]], &[1.0], &p, 0),
            Err(SurrogateError::InsufficientData { .. })
        ));
        assert!(matches!(
            ForestModel::fit(&[vec![0.0], vec![1.0, 2.0]], &[1.0, 2.0], &p, 0),
            Err(SurrogateError::Dimension { .. })
        ));
        let m = ForestModel::fit(&grid(4), &[1.0, 2.0, 3.0, 4.0], &p, 0).unwrap();
        assert!(matches!(m.predict(&[0.0, 1.0]), Err(SurrogateError::Dimension { .. })));
        assert!(loo_means(&grid(2), &[1.0, 2.0], &p, 0).is_err());
    }

    #[test]
    fn loo_identical_points() {
        let xs = vec![vec![0.5]; 3];
        let means = loo_means(&xs, &[1.0, 1.0, 1.0], &ForestParams::default(), 0).unwrap();
        assert_eq!(means, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn loo_means_monotone_on_linear_data() {
        // integer coordinates keep split midpoints exact
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let params = ForestParams {
            n_trees: 4,
            min_leaf: 1,
            bootstrap: false,
            ..Default::default()
        };
        let means = loo_means(&xs, &ys, &params, 17).unwrap();
        // the two end points are extrapolations of a piecewise-constant fit
        let interior = &means[1..9];
        assert!(interior.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
        for (j, m) in interior.iter().enumerate() {
            // held-out point falls on the split midpoint and goes left
            assert!((m - ys[j]).abs() < 1e-12, "{means:?}");
        }
    }

    #[test]
    fn variance_never_negative() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.618).fract(), (i as f64 * 0.29).fract()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1e6 * x[0] - 3e5 * x[1]).collect();
        let m = ForestModel::fit(&xs, &ys, &ForestParams::default(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let q = [rng.random::<f64>(), rng.random::<f64>()];
            assert!(m.predict(&q).unwrap().1 >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn mean_within_target_range(
            ys in proptest::collection::vec(-10.0f64..10.0, 4..40),
            seed in any::<u64>(),
            q in proptest::collection::vec(-0.5f64..1.5, 2),
        ) {
            let xs: Vec<Vec<f64>> = (0..ys.len())
                .map(|i| vec![(i as f64 * 0.618).fract(), (i as f64 * 0.377).fract()])
                .collect();
            let m = ForestModel::fit(&xs, &ys, &ForestParams::default(), seed).unwrap();
            let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
            let mean = m.predict_mean(&q).unwrap();
            prop_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
            let again = ForestModel::fit(&xs, &ys, &ForestParams::default(), seed).unwrap();
            prop_assert_eq!(m.predict(&q).unwrap(), again.predict(&q).unwrap());
        }
    }
}
