use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BenchError, Benchmark, Result};
use crate::seeding::{keyed_rng, Stream};
use crate::space::{ConfigSpace, Configuration, ParamSpec};

const X_MAX: f64 = 10.0;
const Y_MAX: f64 = 20.0;
const Z_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySpec {
    /// Noise level; the standard deviation at epoch `e` is `phi * R / e`.
    pub phi: f64,
    pub r_max: u32,
    pub amplitude: f64,
    pub unit_cost: f64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            phi: 0.2,
            r_max: 27,
            amplitude: 10.0,
            unit_cost: 0.5,
        }
    }
}

impl ToySpec {
    pub fn noise_sd(&self, epoch: u32) -> f64 {
        self.phi * self.r_max as f64 / epoch as f64
    }
}

/// Learning-curve bias, increasing in `epoch` from 12.915 toward 32.935.
pub fn toy_bias(epoch: f64) -> Result<f64> {
    if epoch.is_nan() || epoch <= 0.0 {
        return Err(BenchError::NonPositiveEpoch(epoch));
    }
    Ok(-20.02 / (1.0 + (epoch / 2.569).powf(1.171)) + 32.935)
}

fn check(name: &str, value: f64, lower: f64, upper: f64) -> Result<()> {
    if !(lower..=upper).contains(&value) {
        return Err(BenchError::OutOfRange {
            name: name.into(),
            value,
            lower,
            upper,
        });
    }
    Ok(())
}

/// `t = -A q - b(epoch) + noise` with `q` the min-max scaled quality.
pub fn toy_eval(x: f64, y: f64, z: f64, epoch: u32, spec: &ToySpec, noise: f64) -> Result<f64> {
    check("x", x, -X_MAX, X_MAX)?;
    check("y", y, 0.0, Y_MAX)?;
    check("z", z, 0.0, Z_MAX)?;
    if epoch == 0 || epoch > spec.r_max {
        return Err(BenchError::EpochOutOfRange {
            epoch,
            max: spec.r_max,
        });
    }
    let q = (x * x + (y / 4.0).powi(2) + z) / (X_MAX * X_MAX + (Y_MAX / 4.0).powi(2) + Z_MAX);
    Ok(-spec.amplitude * q - toy_bias(epoch as f64)? + noise)
}

/// Three-parameter synthetic benchmark with epoch-dependent noise. Noise is a
/// pure function of `(seed, config id, epoch)`.
#[derive(Debug, Clone)]
pub struct ToyBenchmark {
    spec: ToySpec,
    seed: u64,
    space: ConfigSpace,
}

impl ToyBenchmark {
    pub fn new(spec: ToySpec, seed: u64) -> Self {
        let space = ConfigSpace::new(vec![
            ParamSpec::continuous("x", -X_MAX, X_MAX),
            ParamSpec::continuous("y", 0.0, Y_MAX),
            ParamSpec::continuous("z", 0.0, Z_MAX),
        ])
        .expect("static space is valid");
        Self { spec, seed, space }
    }

    pub fn spec(&self) -> &ToySpec {
        &self.spec
    }

    /// Noise-free metric.
    pub fn clean_metric(&self, config: &Configuration, epoch: u32) -> Result<f64> {
        let (x, y, z) = self.coords(config)?;
        toy_eval(x, y, z, epoch, &self.spec, 0.0)
    }

    fn coords(&self, config: &Configuration) -> Result<(f64, f64, f64)> {
        self.space.validate(config)?;
        let get = |n: &str| config.get_f64(n).expect("validated");
        Ok((get("x"), get("y"), get("z")))
    }
}

impl Benchmark for ToyBenchmark {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn max_resource(&self) -> u32 {
        self.spec.r_max
    }

    fn metric(&self, config: &Configuration, epoch: u32) -> Result<f64> {
        let (x, y, z) = self.coords(config)?;
        let sd = if epoch == 0 { 0.0 } else { self.spec.noise_sd(epoch) };
        let noise = if sd > 0.0 {
            let mut rng = keyed_rng(self.seed, Stream::Benchmark, &[config.id.0, epoch as u64]);
            Normal::new(0.0, sd).expect("positive sd").sample(&mut rng)
        } else {
            0.0
        };
        toy_eval(x, y, z, epoch, &self.spec, noise)
    }

    fn cost_per_epoch(&self, _config: &Configuration) -> Result<f64> {
        Ok(self.spec.unit_cost)
    }
}
