//! Multi-fidelity surrogate ensemble.
//!
//! One forest is fit per resource level. Levels are weighted by how well
//! their predictions order the configurations observed at the top level
//! (the ranking loss), sharpened by an exponent `gamma`. The combined
//! prediction drives Expected Improvement over a random candidate pool.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::rank::pair_counts;
use crate::records::{FidelityDatasets, Point};
use crate::seeding::derive_seed;
use crate::space::{ConfigId, ConfigSpace, Configuration, Origin};
use crate::surrogate::{loo_prediction_matrix, ForestModel, ForestParams, SurrogateError, VARIANCE_FLOOR};

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

pub type Result<T> = std::result::Result<T, EnsembleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    #[default]
    WeightedSum,
    Gpoe,
}

/// How the weight of the top-level surrogate is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TopWeightRule {
    /// Consistency of the leave-one-out ranking loss on the top level.
    CrossValidated,
    /// `p_K = min(0.99, p_{K-1} * L'_K / L'_{K-1})`.
    #[default]
    Simulated,
    /// Same with the loss ratio inverted.
    SimulatedInverted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleParams {
    pub gamma: f64,
    pub p_random: f64,
    pub combine_mode: CombineMode,
    pub top_weight: TopWeightRule,
    pub min_points_per_level: usize,
    pub n_candidates: usize,
    /// Standardize each level's targets before fitting.
    pub standardize: bool,
    pub forest: ForestParams,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            p_random: 0.2,
            combine_mode: CombineMode::WeightedSum,
            top_weight: TopWeightRule::Simulated,
            min_points_per_level: 5,
            n_candidates: 5000,
            standardize: true,
            forest: ForestParams::default(),
        }
    }
}

/// Number of ordered pairs `(j, k)` whose predicted order disagrees with the
/// observed order: `Σ_j Σ_k 1((μ_j < μ_k) xor (y_j < y_k))`.
pub fn ranking_loss(pred: &[f64], observed: &[f64]) -> Result<u64> {
    if pred.len() != observed.len() {
        return Err(EnsembleError::LengthMismatch(pred.len(), observed.len()));
    }
    if pred.len() < 2 {
        return Err(EnsembleError::InsufficientData {
            needed: 2,
            got: pred.len(),
        });
    }
    // Discordant unordered pairs contribute both orientations; a tie on one
    // side only contributes exactly one.
    let c = pair_counts(pred, observed);
    Ok(2 * c.discordant + c.tied_first + c.tied_second)
}

/// Fraction of consistent ordered pairs, `1 - L / (n (n - 1))`.
pub fn consistency(loss: u64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(EnsembleError::InsufficientData { needed: 2, got: n });
    }
    let pairs = (n * (n - 1)) as f64;
    Ok((1.0 - loss as f64 / pairs).clamp(0.0, 1.0))
}

/// Ranking loss where row `j` uses the model fit without point `j`:
/// `Σ_j Σ_k 1((μ^{-j}(x_j) < μ^{-j}(x_k)) xor (y_j < y_k))`.
pub fn cv_ranking_loss(xs: &[Vec<f64>], ys: &[f64], forest: &ForestParams, seed: u64) -> Result<u64> {
    if xs.len() < 3 {
        return Err(EnsembleError::InsufficientData {
            needed: 3,
            got: xs.len(),
        });
    }
    let matrix = loo_prediction_matrix(xs, ys, forest, seed)?;
    let mut loss = 0u64;
    for (j, row) in matrix.iter().enumerate() {
        for k in 0..ys.len() {
            if (row[j] < row[k]) != (ys[j] < ys[k]) {
                loss += 1;
            }
        }
    }
    Ok(loss)
}

/// `w_i = p_i^γ / Σ_k p_k^γ`; uniform when every `p` is zero.
pub fn weights_from_consistency(p: &[f64], gamma: f64) -> Vec<f64> {
    let powered: Vec<f64> = p.iter().map(|&x| x.max(0.0).powf(gamma)).collect();
    let total: f64 = powered.iter().sum();
    if total > 0.0 && total.is_finite() {
        powered.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / p.len() as f64; p.len()]
    }
}

/// Simulated consistency of the top surrogate.
pub fn simulated_top_consistency(p_below: f64, cv_top: u64, cv_below: u64, inverted: bool) -> f64 {
    let (num, den) = if inverted { (cv_below, cv_top) } else { (cv_top, cv_below) };
    // an error-free level below would divide by zero
    let den = den.max(1);
    (p_below * num as f64 / den as f64).min(0.99)
}

/// Precision-weighted product of Gaussian experts, `(mean, variance)` pairs.
pub fn combine(preds: &[(f64, f64)], weights: &[f64], mode: CombineMode) -> (f64, f64) {
    let active: Vec<(f64, (f64, f64))> = weights
        .iter()
        .copied()
        .zip(preds.iter().copied())
        .filter(|(w, _)| *w > 0.0)
        .collect();
    if let [(_, only)] = active.as_slice() {
        return *only;
    }
    match mode {
        CombineMode::WeightedSum => {
            let mean: f64 = active.iter().map(|(w, (m, _))| w * m).sum();
            // mixture variance written so that one-hot weights are exact
            let var: f64 = active
                .iter()
                .map(|(w, (m, v))| w * (v + (m - mean) * (m - mean)))
                .sum();
            (mean, var.max(VARIANCE_FLOOR))
        }
        CombineMode::Gpoe => {
            let precision: f64 = active.iter().map(|(w, (_, v))| w / v.max(VARIANCE_FLOOR)).sum();
            let mean = active
                .iter()
                .map(|(w, (m, v))| w * m / v.max(VARIANCE_FLOOR))
                .sum::<f64>()
                / precision;
            (mean, (1.0 / precision).max(VARIANCE_FLOOR))
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected Improvement for minimization.
pub fn expected_improvement(mean: f64, variance: f64, y_best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let gap = y_best - mean;
    if sigma == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelWeight {
    pub resource: u32,
    pub consistency: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    resource: u32,
    model: ForestModel,
    /// Affine map from raw targets to the fitted scale.
    shift: f64,
    scale: f64,
}

/// Fitted ensemble: per-level forests and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    levels: Vec<Level>,
    weights: Vec<f64>,
    consistency: Vec<f64>,
    mode: CombineMode,
    cold_start: bool,
    /// Best observed top-level target on the fitted scale.
    y_best: f64,
}

fn standardization(ys: &[f64], enabled: bool) -> (f64, f64) {
    if !enabled {
        return (0.0, 1.0);
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n).sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

fn split(points: &[Point]) -> (Vec<Vec<f64>>, Vec<f64>) {
    points.iter().map(|p| (p.x.clone(), p.y)).unzip()
}

impl EnsembleState {
    /// Fits one surrogate per level with enough data and computes the weight
    /// vector. Returns `None` when no level can be fit.
    pub fn fit(datasets: &FidelityDatasets, params: &EnsembleParams, seed: u64) -> Result<Option<Self>> {
        let min_points = params.min_points_per_level.max(2);
        let Some(top) = datasets.top() else {
            return Ok(None);
        };
        let mut levels = Vec::new();
        for (r, pts) in datasets.iter() {
            if pts.len() < min_points {
                continue;
            }
            let (xs, ys) = split(pts);
            let (shift, scale) = standardization(&ys, params.standardize);
            let zs: Vec<f64> = ys.iter().map(|y| (y - shift) / scale).collect();
            let model = ForestModel::fit(&xs, &zs, &params.forest, derive_seed(seed, &[r as u64]))?;
            levels.push(Level {
                resource: r,
                model,
                shift,
                scale,
            });
        }
        if levels.is_empty() {
            return Ok(None);
        }

        let target = datasets.level(top);
        let (target_x, target_y) = split(target);
        let cold_start = target.len() < 3;
        let (consistency, weights) = if cold_start {
            let k = levels.len();
            (vec![f64::NAN; k], vec![1.0 / k as f64; k])
        } else {
            let n = target.len();
            let mut p = Vec::with_capacity(levels.len());
            for (i, lvl) in levels.iter().enumerate() {
                let pi = if lvl.resource < top {
                    let mu: Vec<f64> = target_x.iter().map(|x| lvl.model.predict_unchecked(x).0).collect();
                    consistency(ranking_loss(&mu, &target_y)?, n)?
                } else {
                    // shared across levels so the two losses differ only through the data
                    let cv_seed = derive_seed(seed, &[0xC0]);
                    let cv_top = cv_ranking_loss(&target_x, &target_y, &params.forest, cv_seed)?;
                    let below = i.checked_sub(1).map(|b| (b, levels[b].resource));
                    match (params.top_weight, below) {
                        (TopWeightRule::CrossValidated, _) | (_, None) => consistency(cv_top, n)?,
                        (rule, Some((b, r_below))) => {
                            let (bx, by) = split(datasets.level(r_below));
                            let cv_below = cv_ranking_loss(&bx, &by, &params.forest, cv_seed)?;
                            simulated_top_consistency(p[b], cv_top, cv_below, rule == TopWeightRule::SimulatedInverted)
                        }
                    }
                };
                p.push(pi);
            }
            let w = weights_from_consistency(&p, params.gamma);
            (p, w)
        };

        let top_level = levels.iter().rev().find(|l| l.resource == top).or(levels.last()).expect("non-empty");
        let raw_best = target.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let y_best = (raw_best - top_level.shift) / top_level.scale;

        Ok(Some(Self {
            levels,
            weights,
            consistency,
            mode: params.combine_mode,
            cold_start,
            y_best,
        }))
    }

    pub fn weights(&self) -> Vec<LevelWeight> {
        self.levels
            .iter()
            .zip(&self.weights)
            .zip(&self.consistency)
            .map(|((l, w), p)| LevelWeight {
                resource: l.resource,
                consistency: *p,
                weight: *w,
            })
            .collect()
    }

    pub fn is_cold_start(&self) -> bool {
        self.cold_start
    }

    pub fn y_best(&self) -> f64 {
        self.y_best
    }

    /// Combined `(mean, variance)` on the fitted scale.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let preds: Vec<(f64, f64)> = self
            .levels
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| if *w > 0.0 { l.model.predict_unchecked(x) } else { (0.0, 0.0) })
            .collect();
        combine(&preds, &self.weights, self.mode)
    }

    pub fn acquisition(&self, x: &[f64]) -> f64 {
        let (m, v) = self.predict(x);
        expected_improvement(m, v, self.y_best)
    }

    /// `acquisition` for many candidates at once.
    pub fn acquisition_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let per_level: Vec<Option<Vec<(f64, f64)>>> = self
            .levels
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| (*w > 0.0).then(|| l.model.predict_batch_unchecked(xs)))
            .collect();
        let mut preds = vec![(0.0, 0.0); self.levels.len()];
        (0..xs.len())
            .map(|j| {
                for (p, level) in preds.iter_mut().zip(&per_level) {
                    *p = level.as_ref().map_or((0.0, 0.0), |v| v[j]);
                }
                let (m, v) = combine(&preds, &self.weights, self.mode);
                expected_improvement(m, v, self.y_best)
            })
            .collect()
    }
}

/// Proposes configurations from a fitted ensemble, interleaving random draws.
pub struct Proposer<'a> {
    pub space: &'a ConfigSpace,
    pub params: &'a EnsembleParams,
    pub ensemble: Option<&'a EnsembleState>,
    /// Restricts candidates to these encoded points when set.
    pub admissible: Option<&'a [Vec<f64>]>,
}

impl Proposer<'_> {
    /// Random with probability `p_random` (or when no model exists), else the
    /// EI argmax over a fresh candidate pool. Ties go to the lowest index.
    pub fn propose<S: Rng + ?Sized, M: Rng + ?Sized>(
        &self,
        id: ConfigId,
        sampling_rng: &mut S,
        model_rng: &mut M,
    ) -> Configuration {
        let Some(ensemble) = self.ensemble else {
            return self.space.sample_random(id, sampling_rng);
        };
        if model_rng.random::<f64>() < self.params.p_random {
            return self.space.sample_random(id, sampling_rng);
        }
        let n = self.params.n_candidates.max(1);
        let candidates: Vec<Vec<f64>> = match self.admissible.filter(|p| !p.is_empty()) {
            Some(pool) => (0..n).map(|_| pool[model_rng.random_range(0..pool.len())].clone()).collect(),
            None => (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..self.space.dim()).map(|_| model_rng.random::<f64>()).collect();
                    self.space.canonicalize(&raw)
                })
                .collect(),
        };
        let scores = ensemble.acquisition_batch(&candidates);
        let mut best = 0;
        for (j, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = j;
            }
        }
        let u = &candidates[best];
        self.space
            .decode(id, u, Origin::Model)
            .expect("candidate has space dimension")
    }
}

/// Weight vectors logged per ensemble refit, for offline analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightLog {
    pub rows: Vec<WeightRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub iteration: usize,
    pub resource: u32,
    pub weight: f64,
}

impl WeightLog {
    pub fn push(&mut self, weights: &[LevelWeight]) {
        let iteration = self.iterations();
        self.rows.extend(weights.iter().map(|w| WeightRow {
            iteration,
            resource: w.resource,
            weight: w.weight,
        }));
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iteration + 1)
    }

    pub fn by_iteration(&self) -> BTreeMap<usize, Vec<(u32, f64)>> {
        let mut out: BTreeMap<usize, Vec<(u32, f64)>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.iteration).or_default().push((r.resource, r.weight));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_loss(mu: &[f64], y: &[f64]) -> u64 {
        let mut l = 0;
        for j in 0..mu.len() {
            for k in 0..mu.len() {
                if (mu[j] < mu[k]) ^ (y[j] < y[k]) {
                    l += 1;
                }
            }
        }
        l
    }

    #[test]
    fn ranking_loss_examples() {
        let y = [0.4, 0.1, 0.9, 0.3];
        assert_eq!(ranking_loss(&y, &y).unwrap(), 0);
        assert_eq!(ranking_loss(&[0.3, 0.1, 0.2], &[0.1, 0.2, 0.3]).unwrap(), 4);
        assert_eq!(ranking_loss(&[4.0, 3.0, 2.0, 1.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 12);
        assert!(ranking_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn consistency_examples() {
        assert_eq!(consistency(0, 5).unwrap(), 1.0);
        assert!((consistency(4, 3).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(consistency(12, 4).unwrap(), 0.0);
        assert!(consistency(0, 1).is_err());
    }

    #[test]
    fn weight_examples() {
        let w = weights_from_consistency(&[0.5, 0.75], 3.0);
        assert!((w[0] - 0.125 / 0.546875).abs() < 1e-12);
        assert!((w[0] - 0.2286).abs() < 1e-4 && (w[1] - 0.7714).abs() < 1e-4);
        assert_eq!(weights_from_consistency(&[0.3; 4], 3.0), vec![0.25; 4]);
        assert_eq!(simulated_top_consistency(0.65, 20, 10, false), 0.99);
        assert!((simulated_top_consistency(0.6, 5, 10, false) - 0.3).abs() < 1e-12);
        assert!((simulated_top_consistency(0.6, 5, 10, true) - 0.99).abs() < 1e-12);
        // zero loss below is replaced by one
        assert!((simulated_top_consistency(0.1, 3, 0, false) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cv_loss_monotone_data_and_constant_targets() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0, ((i * 7) % 12) as f64 / 11.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let l = cv_ranking_loss(&xs, &ys, &ForestParams::default(), 3).unwrap();
        assert!(l <= 8, "cv loss {l}");

        let flat = vec![1.0; 12];
        let l = cv_ranking_loss(&xs, &flat, &ForestParams::default(), 3).unwrap();
        let m = loo_prediction_matrix(&xs, &flat, &ForestParams::default(), 3).unwrap();
        let expected = (0..12)
            .flat_map(|j| (0..12).map(move |k| (j, k)))
            .filter(|&(j, k)| m[j][j] < m[j][k])
            .count() as u64;
        assert_eq!(l, expected);
        assert!(cv_ranking_loss(&xs[..2], &ys[..2], &ForestParams::default(), 3).is_err());
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(&[(0.3, 0.02)], &[1.0], CombineMode::WeightedSum), (0.3, 0.02));
        let (m, v) = combine(&[(1.0, 0.5), (3.0, 0.5)], &[0.5, 0.5], CombineMode::WeightedSum);
        assert!((m - 2.0).abs() < 1e-12);
        assert!((v - (0.5 + 4.0 / 4.0)).abs() < 1e-12);
        let preds = [(0.7, 0.01), (-0.2, 0.3)];
        assert_eq!(combine(&preds, &[1.0, 0.0], CombineMode::WeightedSum), preds[0]);
        assert_eq!(combine(&preds, &[1.0, 0.0], CombineMode::Gpoe), preds[0]);
        let (m, v) = combine(&[(1.0, 1.0), (3.0, 1.0)], &[0.5, 0.5], CombineMode::Gpoe);
        assert!((m - 2.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ei_examples() {
        assert!((expected_improvement(0.0, 1.0, 0.0) - 0.398942).abs() < 1e-5);
        assert_eq!(expected_improvement(1.0, 0.0, 0.5), 0.0);
        assert_eq!(expected_improvement(0.2, 0.0, 0.5), 0.3);
        let mut prev = 0.0;
        for i in 1..200 {
            let sigma = i as f64 * 0.05;
            let h = 1e-6;
            let ei = expected_improvement(0.3, sigma * sigma, 0.3);
            let ei_h = expected_improvement(0.3, (sigma + h) * (sigma + h), 0.3);
            assert!(ei > prev && (ei_h - ei) / h > 0.0);
            prev = ei;
        }
    }

    fn datasets(levels: &[(u32, Vec<(Vec<f64>, f64)>)]) -> FidelityDatasets {
        let mut id = 0;
        FidelityDatasets::from_levels(
            levels
                .iter()
                .map(|(r, pts)| {
                    let pts = pts
                        .iter()
                        .map(|(x, y)| {
                            id += 1;
                            Point {
                                config_id: ConfigId(id),
                                x: x.clone(),
                                y: *y,
                            }
                        })
                        .collect();
                    (*r, pts)
                })
                .collect(),
        )
    }

    #[test]
    fn ensemble_single_level_matches_surrogate() {
        let pts: Vec<(Vec<f64>, f64)> = (0..20).map(|i| (vec![i as f64 / 19.0], (i as f64 - 7.0).powi(2))).collect();
        let ds = datasets(&[(27, pts.clone())]);
        let params = EnsembleParams {
            standardize: false,
            ..Default::default()
        };
        let e = EnsembleState::fit(&ds, &params, 4).unwrap().unwrap();
        assert_eq!(e.weights().len(), 1);
        assert_eq!(e.weights()[0].weight, 1.0);
        let (xs, ys): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
        let direct = ForestModel::fit(&xs, &ys, &params.forest, derive_seed(4, &[27])).unwrap();
        for q in [0.0, 0.41, 0.9] {
            assert_eq!(e.predict(&[q]), direct.predict(&[q]).unwrap());
        }
    }

    #[test]
    fn cold_start_is_uniform_over_fitted_levels() {
        let low: Vec<(Vec<f64>, f64)> = (0..10).map(|i| (vec![i as f64 / 9.0], i as f64)).collect();
        let top = vec![(vec![0.5], 1.0), (vec![0.7], 2.0)];
        let ds = datasets(&[(1, low.clone()), (3, low), (9, top)]);
        let e = EnsembleState::fit(&ds, &EnsembleParams::default(), 0).unwrap().unwrap();
        assert!(e.is_cold_start());
        let w: Vec<f64> = e.weights().iter().map(|w| w.weight).collect();
        assert_eq!(w, vec![0.5, 0.5]);
        assert!(EnsembleState::fit(&FidelityDatasets::default(), &EnsembleParams::default(), 0)
            .unwrap()
            .is_none());
    }

    #[test]
    fn proposer_with_full_random_fraction_is_plain_sampling() {
        let space = ConfigSpace::new(vec![crate::space::ParamSpec::continuous("x", -1.0, 1.0)]).unwrap();
        let pts: Vec<(Vec<f64>, f64)> = (0..30).map(|i| (vec![i as f64 / 29.0], i as f64)).collect();
        let ds = datasets(&[(9, pts)]);
        let params = EnsembleParams {
            p_random: 1.0,
            ..Default::default()
        };
        let e = EnsembleState::fit(&ds, &params, 0).unwrap();
        let proposer = Proposer {
            space: &space,
            params: &params,
            ensemble: e.as_ref(),
            admissible: None,
        };
        let mut s1 = ChaCha8Rng::seed_from_u64(1);
        let mut s2 = ChaCha8Rng::seed_from_u64(1);
        let mut m = ChaCha8Rng::seed_from_u64(2);
        for i in 0..20 {
            assert_eq!(
                proposer.propose(ConfigId(i), &mut s1, &mut m),
                space.sample_random(ConfigId(i), &mut s2)
            );
        }
        let empty = Proposer {
            ensemble: None,
            ..proposer
        };
        let mut s2 = ChaCha8Rng::seed_from_u64(1);
        let mut s1 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            empty.propose(ConfigId(0), &mut s1, &mut m),
            space.sample_random(ConfigId(0), &mut s2)
        );
    }

    #[test]
    fn proposals_concentrate_near_quadratic_minimum() {
        let space = ConfigSpace::new(vec![crate::space::ParamSpec::continuous("x", 0.0, 1.0)]).unwrap();
        let minimizer = 0.37;
        // leaves of three points average the minimum away; single-point
        // leaves let the forest resolve it
        let params = EnsembleParams {
            p_random: 0.0,
            forest: ForestParams {
                min_leaf: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut hits = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let pts: Vec<(Vec<f64>, f64)> = (0..30)
                .map(|_| {
                    let x: f64 = rng.random();
                    (vec![x], (x - minimizer).powi(2))
                })
                .collect();
            let ds = datasets(&[(27, pts)]);
            let e = EnsembleState::fit(&ds, &params, seed).unwrap().unwrap();
            // oracle: dense-grid argmax of the same acquisition
            let grid_best = (0..=2000)
                .map(|i| i as f64 / 2000.0)
                .max_by(|a, b| e.acquisition(&[*a]).total_cmp(&e.acquisition(&[*b])))
                .unwrap();
            let proposer = Proposer {
                space: &space,
                params: &params,
                ensemble: Some(&e),
                admissible: None,
            };
            let c = proposer.propose(ConfigId(0), &mut rng.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
            let x = c.get_f64("x").unwrap();
            assert_eq!(c.origin, Origin::Model);
            assert!((x - grid_best).abs() < 0.02, "{x} vs grid {grid_best}");
            if (x - minimizer).abs() < 0.15 {
                hits += 1;
            }
        }
        assert!(hits >= 8, "hits {hits}");
    }

    proptest! {
        #[test]
        fn ranking_loss_matches_double_loop(v in proptest::collection::vec((0u8..8, 0u8..8), 2..30)) {
            let mu: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            prop_assert_eq!(ranking_loss(&mu, &y).unwrap(), brute_loss(&mu, &y));
        }

        #[test]
        fn ranking_loss_invariant_under_monotone_maps(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..25)) {
            let mu: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            let mu2: Vec<f64> = mu.iter().map(|m| m.exp() * 3.0 + 1.0).collect();
            let y2: Vec<f64> = y.iter().map(|m| m * m * m).collect();
            let base = ranking_loss(&mu, &y).unwrap();
            prop_assert_eq!(ranking_loss(&mu2, &y).unwrap(), base);
            prop_assert_eq!(ranking_loss(&mu, &y2).unwrap(), base);
        }

        #[test]
        fn weights_sum_to_one_and_permute(p in proptest::collection::vec(0.0f64..1.0, 1..10), gamma in 0.5f64..5.0) {
            let w = weights_from_consistency(&p, gamma);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
            let mut rev = p.clone();
            rev.reverse();
            let mut wr = weights_from_consistency(&rev, gamma);
            wr.reverse();
            for (a, b) in w.iter().zip(&wr) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn one_hot_combination_is_exact(
            preds in proptest::collection::vec((-3.0f64..3.0, 1e-8f64..2.0), 2..6),
            pick in 0usize..6,
        ) {
            let pick = pick % preds.len();
            let mut w = vec![0.0; preds.len()];
            w[pick] = 1.0;
            prop_assert_eq!(combine(&preds, &w, CombineMode::WeightedSum), preds[pick]);
            prop_assert_eq!(combine(&preds, &w, CombineMode::Gpoe), preds[pick]);
        }
    }
}
