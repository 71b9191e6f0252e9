use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BenchError, Benchmark, Result};
use crate::seeding::{keyed_rng, Stream};
use crate::space::{ConfigId, ConfigSpace, Configuration, Origin, ParamSpec, ParamValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularRow {
    pub params: BTreeMap<String, ParamValue>,
    /// Metric after each epoch, lower is better.
    pub curve: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_per_epoch: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TabularFile {
    space: serde_json::Value,
    rows: Vec<TabularRow>,
}

/// Tabulated learning curves. Configurations not in the table are snapped to
/// the nearest row in encoded space.
#[derive(Debug, Clone)]
pub struct TabularBenchmark {
    space: ConfigSpace,
    rows: Vec<TabularRow>,
    encoded: Vec<Vec<f64>>,
    costs: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
    epochs: u32,
}

fn key(u: &[f64]) -> Vec<u64> {
    u.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl TabularBenchmark {
    /// Validates rows; a missing cost is drawn once per row from U[0.3, 0.7]
    /// under `seed`.
    pub fn new(space: ConfigSpace, rows: Vec<TabularRow>, seed: u64) -> Result<Self> {
        let schema = |index: usize, msg: String| BenchError::Schema { index, msg };
        let epochs = rows.first().map_or(0, |r| r.curve.len());
        if rows.is_empty() || epochs == 0 {
            return Err(schema(0, "benchmark needs at least one row with a non-empty curve".into()));
        }
        let mut encoded = Vec::with_capacity(rows.len());
        let mut costs = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let config = Configuration {
                id: ConfigId(i as u64),
                values: row.params.clone(),
                origin: Origin::Random,
            };
            let u = space.encode(&config).map_err(|e| schema(i, e.to_string()))?;
            if row.curve.len() != epochs {
                return Err(schema(i, format!("curve length {} differs from {epochs}", row.curve.len())));
            }
            if row.curve.iter().any(|v| !v.is_finite()) {
                return Err(schema(i, "curve contains non-finite values".into()));
            }
            let cost = match row.cost_per_epoch {
                Some(c) if c > 0.0 && c.is_finite() => c,
                Some(c) => return Err(schema(i, format!("cost_per_epoch must be positive, got {c}"))),
                None => keyed_rng(seed, Stream::Cost, &[i as u64]).random_range(0.3..=0.7),
            };
            if let Some(&first) = index.get(&key(&u)) {
                return Err(BenchError::DuplicateRow { index: i, first });
            }
            index.insert(key(&u), i);
            encoded.push(u);
            costs.push(cost);
        }
        Ok(Self {
            space,
            rows,
            encoded,
            costs,
            index,
            epochs: epochs as u32,
        })
    }

    pub fn from_json_str(s: &str, seed: u64) -> Result<Self> {
        let file: TabularFile = serde_json::from_str(s)?;
        let space = ConfigSpace::from_json_value(file.space)?;
        Self::new(space, file.rows, seed)
    }

    pub fn load(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, seed)
    }

    pub fn to_json_string(&self) -> String {
        let file = TabularFile {
            space: self.space.to_json_value(),
            rows: self.rows.clone(),
        };
        serde_json::to_string(&file).expect("benchmark serializes")
    }

    pub fn rows(&self) -> &[TabularRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_cost(&self, row: usize) -> f64 {
        self.costs[row]
    }

    /// Row holding this configuration, nearest in encoded space when the
    /// values are not tabulated (lowest index on ties).
    pub fn row_of(&self, config: &Configuration) -> Result<usize> {
        let u = self.space.encode(config)?;
        if let Some(&i) = self.index.get(&key(&u)) {
            return Ok(i);
        }
        let dist = |v: &Vec<f64>| v.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut best = (f64::INFINITY, 0);
        for (i, v) in self.encoded.iter().enumerate() {
            let d = dist(v);
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best.1)
    }

    /// Metric at `epoch` and the cost of training from `from` to `epoch`.
    pub fn eval(&self, config: &Configuration, from: u32, epoch: u32) -> Result<(f64, f64)> {
        let row = self.row_of(config)?;
        if epoch == 0 || epoch > self.epochs {
            return Err(BenchError::EpochOutOfRange {
                epoch,
                max: self.epochs,
            });
        }
        let cost = self.costs[row] * epoch.saturating_sub(from) as f64;
        Ok((self.rows[row].curve[epoch as usize - 1], cost))
    }

    /// Synthetic grid over two continuous parameters with smooth curves; the
    /// table is a pure function of `spec` (including its seed).
    pub fn synthetic(spec: &SyntheticSpec) -> Self {
        let seed = spec.seed;
        let space = ConfigSpace::new(vec![
            ParamSpec::continuous("a", 0.0, 1.0),
            ParamSpec::continuous("b", 0.0, 1.0),
        ])
        .expect("static space is valid");
        let g = spec.grid.max(2);
        let normal = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite sd");
        let mut rows = Vec::with_capacity(g * g);
        for i in 0..g {
            for j in 0..g {
                let idx = (i * g + j) as u64;
                let (a, b) = (i as f64 / (g - 1) as f64, j as f64 / (g - 1) as f64);
                let dist = ((a - 0.3).powi(2) + (b - 0.6).powi(2)) / 0.85;
                let last = 0.1 + 0.4 * dist;
                let mut rng = keyed_rng(seed, Stream::Benchmark, &[idx]);
                let start = if spec.crossing {
                    // slow starters end best
                    0.8 - (last - 0.1) + normal(spec.start_noise).sample(&mut rng)
                } else {
                    0.9
                };
                let curve = (1..=spec.epochs)
                    .map(|e| {
                        let decay = (-((e - 1) as f64) / spec.time_constant).exp();
                        last + (start - last) * decay + normal(spec.noise).sample(&mut rng)
                    })
                    .collect();
                rows.push(TabularRow {
                    params: [("a", a), ("b", b)]
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), ParamValue::Float(v)))
                        .collect(),
                    curve,
                    cost_per_epoch: spec.cost_per_epoch,
                });
            }
        }
        Self::new(space, rows, seed).expect("generated rows are valid")
    }
}

/// Parameters of the synthetic tabular generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Points per axis; the table has `grid^2` rows.
    pub grid: usize,
    pub epochs: u32,
    /// Anti-correlate early and final metrics.
    pub crossing: bool,
    pub start_noise: f64,
    pub noise: f64,
    pub time_constant: f64,
    pub cost_per_epoch: Option<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: 20,
            epochs: 27,
            crossing: false,
            start_noise: 0.2,
            noise: 0.005,
            time_constant: 2.5,
            cost_per_epoch: None,
        }
    }
}

impl Benchmark for TabularBenchmark {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn max_resource(&self) -> u32 {
        self.epochs
    }

    fn metric(&self, config: &Configuration, epoch: u32) -> Result<f64> {
        self.eval(config, epoch, epoch).map(|(m, _)| m)
    }

    fn cost_per_epoch(&self, config: &Configuration) -> Result<f64> {
        Ok(self.costs[self.row_of(config)?])
    }

    fn admissible(&self) -> Option<&[Vec<f64>]> {
        Some(&self.encoded)
    }

    fn snap(&self, mut config: Configuration) -> Configuration {
        if let Ok(row) = self.row_of(&config) {
            config.values = self.rows[row].params.clone();
        }
        config
    }
}
