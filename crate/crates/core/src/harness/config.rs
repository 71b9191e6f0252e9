use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Result};
use crate::bench::{SyntheticSpec, ToySpec};
use crate::ensemble::{EnsembleParams, TopWeightRule};
use crate::sched::{BracketMode, FgfMode, FlexbandParams, LambdaSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rs,
    Hb,
    BohbLite,
    MfesLite,
    Flexhb,
    FlexhbNoFgf,
    FlexhbNoGlosh,
    FlexhbNoFlexband,
    AllExplore,
    AllExploit,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Rs,
        Method::Hb,
        Method::BohbLite,
        Method::MfesLite,
        Method::Flexhb,
        Method::FlexhbNoFgf,
        Method::FlexhbNoGlosh,
        Method::FlexhbNoFlexband,
        Method::AllExplore,
        Method::AllExploit,
    ];

    pub fn name(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .expect("unit variant serializes to a string")
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| HarnessError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchmarkSpec {
    Toy(ToySpec),
    Tabular { path: PathBuf },
    Synthetic(SyntheticSpec),
    Subprocess {
        command: Vec<String>,
        /// Space definition document.
        space: serde_json::Value,
        r_max: u32,
        #[serde(default)]
        checkpoint_root: Option<PathBuf>,
    },
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec::Toy(ToySpec::default())
    }
}

/// Component switches that replace the method's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub fgf: Option<bool>,
    pub glosh: Option<bool>,
    pub flexband: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub method: Method,
    pub benchmark: BenchmarkSpec,
    pub seed: u64,
    /// Defaults to the benchmark's maximum resource.
    pub r_max: Option<u32>,
    pub eta: u32,
    /// Virtual seconds.
    pub time_limit: Option<f64>,
    pub max_evaluations: Option<usize>,
    pub max_outer_loops: Option<usize>,
    pub bracket_mode: BracketMode,
    /// Revival probabilities keyed by resource; defaults per geometry.
    pub lambda: Option<LambdaSchedule>,
    pub flexband_params: FlexbandParams,
    /// Fine-grained measurement spacing; defaults to `eta`.
    pub g: Option<u32>,
    /// Fixed fine-grained level set, replacing the spacing rule.
    pub fgf_levels: Option<Vec<u32>>,
    pub ensemble: EnsembleParams,
    pub proposal_overhead: f64,
    pub workers: usize,
    pub overrides: Overrides,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Hb,
            benchmark: BenchmarkSpec::default(),
            seed: 0,
            r_max: None,
            eta: 3,
            time_limit: None,
            max_evaluations: None,
            max_outer_loops: None,
            bracket_mode: BracketMode::Formula,
            lambda: None,
            flexband_params: FlexbandParams::default(),
            g: None,
            fgf_levels: None,
            ensemble: EnsembleParams::default(),
            proposal_overhead: 0.05,
            workers: 1,
            overrides: Overrides::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn resolve(&self) -> Result<Composition> {
        if self.time_limit.is_none() && self.max_evaluations.is_none() && self.max_outer_loops.is_none() {
            return Err(HarnessError::Config(
                "set at least one of time_limit, max_evaluations, max_outer_loops".into(),
            ));
        }
        Composition::for_config(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    /// One configuration at a time, straight to full fidelity.
    FullFidelity,
    Hyperband,
    AllExplore,
    AllExploit,
}

/// Resource levels the surrogate ensemble is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleLevels {
    /// Full fidelity only.
    Top,
    /// Successive-halving decision levels.
    Checkpoints,
    /// Every measured level.
    All,
}

/// The components a method is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub plan: PlanKind,
    pub flexband: bool,
    pub glosh: bool,
    pub fgf: FgfMode,
    /// `None` means random sampling.
    pub model: Option<EnsembleLevels>,
    pub top_weight: TopWeightRule,
}

impl Composition {
    fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        use Method::*;
        let fine = match &cfg.fgf_levels {
            Some(levels) => FgfMode::Explicit { levels: levels.clone() },
            None => FgfMode::Every {
                g: cfg.g.unwrap_or(cfg.eta),
            },
        };
        let (plan, flexband, glosh, fgf_on, model) = match cfg.method {
            Rs => (PlanKind::FullFidelity, false, false, false, None),
            Hb => (PlanKind::Hyperband, false, false, false, None),
            BohbLite => (PlanKind::Hyperband, false, false, false, Some(EnsembleLevels::Top)),
            MfesLite => (PlanKind::Hyperband, false, false, false, Some(EnsembleLevels::Checkpoints)),
            Flexhb => (PlanKind::Hyperband, true, true, true, Some(EnsembleLevels::All)),
            FlexhbNoFgf => (PlanKind::Hyperband, true, true, false, Some(EnsembleLevels::Checkpoints)),
            FlexhbNoGlosh => (PlanKind::Hyperband, true, false, true, Some(EnsembleLevels::All)),
            FlexhbNoFlexband => (PlanKind::Hyperband, false, true, true, Some(EnsembleLevels::All)),
            AllExplore => (PlanKind::AllExplore, false, false, false, None),
            AllExploit => (PlanKind::AllExploit, false, false, false, None),
        };
        let o = cfg.overrides;
        if cfg.method == Rs && (o.fgf.is_some() || o.glosh.is_some() || o.flexband.is_some()) {
            warn!("component overrides have no effect on random search");
        }
        let full = cfg.method == Rs;
        let fgf_on = !full && o.fgf.unwrap_or(fgf_on);
        let glosh = !full && o.glosh.unwrap_or(glosh);
        let flexband = !full && o.flexband.unwrap_or(flexband);
        // the simulated top-level weight needs fine-grained levels below the top
        let top_weight = match model {
            Some(EnsembleLevels::All) if fgf_on => cfg.ensemble.top_weight,
            _ => TopWeightRule::CrossValidated,
        };
        if model.is_none() && cfg.ensemble != EnsembleParams::default() {
            warn!("ensemble settings are ignored by {}", cfg.method.name());
        }
        if !glosh && cfg.lambda.is_some() {
            warn!("lambda schedule is ignored without global ranking");
        }
        Ok(Self {
            plan,
            flexband,
            glosh,
            fgf: if fgf_on { fine } else { FgfMode::Off },
            model,
            top_weight,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: Method) -> ExperimentConfig {
        ExperimentConfig {
            method,
            max_outer_loops: Some(1),
            ..Default::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(&m.name()).unwrap(), m);
        }
        assert_eq!(Method::FlexhbNoFgf.name(), "flexhb_no_fgf");
        assert!(matches!(Method::parse("smac"), Err(HarnessError::UnknownMethod(_))));
    }

    #[test]
    fn ablations_drop_one_component() {
        let full = cfg(Method::Flexhb).resolve().unwrap();
        assert!(full.flexband && full.glosh && !full.fgf.is_off());
        assert_eq!(full.top_weight, TopWeightRule::Simulated);
        let c = cfg(Method::FlexhbNoFgf).resolve().unwrap();
        assert!(c.flexband && c.glosh && c.fgf.is_off());
        assert_eq!(c.top_weight, TopWeightRule::CrossValidated);
        let c = cfg(Method::FlexhbNoGlosh).resolve().unwrap();
        assert!(c.flexband && !c.glosh && !c.fgf.is_off());
        let c = cfg(Method::FlexhbNoFlexband).resolve().unwrap();
        assert!(!c.flexband && c.glosh && !c.fgf.is_off());
        let hb = cfg(Method::Hb).resolve().unwrap();
        assert!(!hb.flexband && !hb.glosh && hb.fgf.is_off() && hb.model.is_none());
    }

    #[test]
    fn overrides_and_bounds() {
        let mut c = cfg(Method::Hb);
        c.overrides.glosh = Some(true);
        assert!(c.resolve().unwrap().glosh);
        c.method = Method::Rs;
        assert!(!c.resolve().unwrap().glosh);
        let unbounded = ExperimentConfig::default();
        assert!(matches!(unbounded.resolve(), Err(HarnessError::Config(_))));
        let mut e = cfg(Method::Flexhb);
        e.fgf_levels = Some(vec![1, 6]);
        assert_eq!(e.resolve().unwrap().fgf, FgfMode::Explicit { levels: vec![1, 6] });
    }

    #[test]
    fn json_defaults_and_hash() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"method":"flexhb","seed":3,"time_limit":100,"benchmark":{"kind":"toy","phi":0.5}}"#,
        )
        .unwrap();
        assert_eq!(c.eta, 3);
        assert_eq!(c.benchmark, BenchmarkSpec::Toy(ToySpec { phi: 0.5, ..Default::default() }));
        let back: ExperimentConfig = serde_json::from_str(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seed = 4;
        assert_ne!(d.hash(), c.hash());
    }
}
