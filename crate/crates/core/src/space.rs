//! Hyperparameter spaces, configuration sampling and unit-cube encoding.
//!
//! Every parameter maps to one coordinate of `[0, 1]^d`. Numeric parameters
//! are mapped affinely (in the log domain when `log` is set), categorical ones
//! to `index / (K - 1)`. Random sampling is uniform in this encoded space.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("parameter `{0}`: lower bound must be below upper bound")]
    EmptyRange(String),
    #[error("parameter `{0}`: log scale requires a positive lower bound")]
    NonPositiveLog(String),
    #[error("parameter `{0}`: categorical needs at least two choices")]
    TooFewChoices(String),
    #[error("parameter `{0}`: missing field `{1}`")]
    MissingField(String, &'static str),
    #[error("parameter `{0}`: unknown kind `{1}`")]
    UnknownKind(String, String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("space has no parameters")]
    Empty,
    #[error("parameter `{0}` missing from configuration")]
    MissingValue(String),
    #[error("parameter `{name}`: value {value} outside its domain")]
    OutOfDomain { name: String, value: String },
    #[error("configuration has unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("encoded vector has dimension {got}, space has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("reading space file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing space file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SpaceError>;

/// Identifier of a configuration within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigId(pub u64);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Continuous { lower: f64, upper: f64, log: bool },
    Integer { lower: i64, upper: i64, log: bool },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Continuous { lower, upper, log: false },
        }
    }

    pub fn log_continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Continuous { lower, upper, log: true },
        }
    }

    pub fn integer(name: &str, lower: i64, upper: i64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Integer { lower, upper, log: false },
        }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Categorical {
                choices: choices.iter().map(|c| c.to_string()).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            ParamKind::Continuous { lower, upper, log } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(SpaceError::EmptyRange(self.name.clone()));
                }
                if *log && *lower <= 0.0 {
                    return Err(SpaceError::NonPositiveLog(self.name.clone()));
                }
            }
            ParamKind::Integer { lower, upper, log } => {
                if lower >= upper {
                    return Err(SpaceError::EmptyRange(self.name.clone()));
                }
                if *log && *lower <= 0 {
                    return Err(SpaceError::NonPositiveLog(self.name.clone()));
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.len() < 2 {
                    return Err(SpaceError::TooFewChoices(self.name.clone()));
                }
            }
        }
        Ok(())
    }

    fn numeric_to_unit(lower: f64, upper: f64, log: bool, v: f64) -> f64 {
        if log {
            (v.ln() - lower.ln()) / (upper.ln() - lower.ln())
        } else {
            (v - lower) / (upper - lower)
        }
    }

    fn unit_to_numeric(lower: f64, upper: f64, log: bool, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if log {
            (lower.ln() + u * (upper.ln() - lower.ln())).exp().clamp(lower, upper)
        } else {
            (lower + u * (upper - lower)).clamp(lower, upper)
        }
    }

    fn encode(&self, value: &ParamValue) -> Result<f64> {
        let out_of_domain = || SpaceError::OutOfDomain {
            name: self.name.clone(),
            value: value.to_string(),
        };
        match (&self.kind, value) {
            (ParamKind::Continuous { lower, upper, log }, ParamValue::Float(_) | ParamValue::Int(_)) => {
                let v = value.as_f64().expect("numeric");
                if !(v.is_finite() && v >= *lower && v <= *upper) {
                    return Err(out_of_domain());
                }
                Ok(Self::numeric_to_unit(*lower, *upper, *log, v))
            }
            (ParamKind::Integer { lower, upper, log }, ParamValue::Int(_) | ParamValue::Float(_)) => {
                let x = value.as_f64().expect("numeric");
                // JSON round trips may hand back `3.0` for an integer parameter
                if x.fract() != 0.0 {
                    return Err(out_of_domain());
                }
                let v = x as i64;
                if v < *lower || v > *upper {
                    return Err(out_of_domain());
                }
                Ok(Self::numeric_to_unit(*lower as f64, *upper as f64, *log, x))
            }
            (ParamKind::Categorical { choices }, ParamValue::Choice(c)) => {
                let idx = choices.iter().position(|x| x == c).ok_or_else(out_of_domain)?;
                Ok(idx as f64 / (choices.len() - 1) as f64)
            }
            _ => Err(out_of_domain()),
        }
    }

    fn decode(&self, u: f64) -> ParamValue {
        match &self.kind {
            ParamKind::Continuous { lower, upper, log } => {
                ParamValue::Float(Self::unit_to_numeric(*lower, *upper, *log, u))
            }
            ParamKind::Integer { lower, upper, log } => {
                let v = Self::unit_to_numeric(*lower as f64, *upper as f64, *log, u);
                ParamValue::Int((v.round() as i64).clamp(*lower, *upper))
            }
            ParamKind::Categorical { choices } => {
                let k = choices.len() - 1;
                let idx = (u.clamp(0.0, 1.0) * k as f64).round() as usize;
                ParamValue::Choice(choices[idx.min(k)].clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Choice(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Choice(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Random,
    Model,
    Revived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub id: ConfigId,
    pub values: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub origin: Origin,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(ParamValue::as_f64)
    }
}

/// An ordered list of parameter definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    params: Vec<ParamSpec>,
}

impl ConfigSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut seen = BTreeSet::new();
        for p in &params {
            p.validate()?;
            if !seen.insert(p.name.clone()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Draws a configuration uniformly in the encoded space (uniformly over
    /// choices for categorical parameters).
    pub fn sample_random<R: Rng + ?Sized>(&self, id: ConfigId, rng: &mut R) -> Configuration {
        let u: Vec<f64> = self
            .params
            .iter()
            .map(|p| match &p.kind {
                ParamKind::Categorical { choices } => {
                    let k = choices.len();
                    rng.random_range(0..k) as f64 / (k - 1) as f64
                }
                _ => rng.random::<f64>(),
            })
            .collect();
        self.decode(id, &u, Origin::Random)
            .expect("dimension matches by construction")
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        self.encode(config).map(|_| ())
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        for name in config.values.keys() {
            if !self.params.iter().any(|p| &p.name == name) {
                return Err(SpaceError::UnknownParameter(name.clone()));
            }
        }
        self.params
            .iter()
            .map(|p| {
                let v = config
                    .values
                    .get(&p.name)
                    .ok_or_else(|| SpaceError::MissingValue(p.name.clone()))?;
                p.encode(v)
            })
            .collect()
    }

    pub fn decode(&self, id: ConfigId, u: &[f64], origin: Origin) -> Result<Configuration> {
        if u.len() != self.dim() {
            return Err(SpaceError::Dimension {
                expected: self.dim(),
                got: u.len(),
            });
        }
        let values = self
            .params
            .iter()
            .zip(u)
            .map(|(p, &x)| (p.name.clone(), p.decode(x)))
            .collect();
        Ok(Configuration { id, values, origin })
    }

    /// Rounds an encoded point onto the representable lattice (integer and
    /// categorical coordinates snap to their nearest admissible value).
    pub fn canonicalize(&self, u: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(u)
            .map(|(p, &x)| match p.kind {
                ParamKind::Continuous { .. } => x.clamp(0.0, 1.0),
                _ => p.encode(&p.decode(x)).expect("decoded value is in domain"),
            })
            .collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: SpaceDoc = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn from_json_value(v: serde_json::Value) -> Result<Self> {
        let doc: SpaceDoc = serde_json::from_value(v)?;
        doc.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(SpaceDoc::from(self)).expect("space document serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_json_value()).expect("serializable");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceDoc {
    params: Vec<ParamDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamDoc {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    log: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    choices: Vec<String>,
}

impl TryFrom<SpaceDoc> for ConfigSpace {
    type Error = SpaceError;

    fn try_from(doc: SpaceDoc) -> Result<Self> {
        let params = doc
            .params
            .into_iter()
            .map(|p| {
                let bound = |v: Option<f64>, field| v.ok_or(SpaceError::MissingField(p.name.clone(), field));
                let kind = match p.kind.as_str() {
                    "continuous" => ParamKind::Continuous {
                        lower: bound(p.lower, "lower")?,
                        upper: bound(p.upper, "upper")?,
                        log: p.log,
                    },
                    "integer" => ParamKind::Integer {
                        lower: bound(p.lower, "lower")?.round() as i64,
                        upper: bound(p.upper, "upper")?.round() as i64,
                        log: p.log,
                    },
                    "categorical" => ParamKind::Categorical { choices: p.choices },
                    other => return Err(SpaceError::UnknownKind(p.name.clone(), other.to_string())),
                };
                Ok(ParamSpec { name: p.name, kind })
            })
            .collect::<Result<Vec<_>>>()?;
        ConfigSpace::new(params)
    }
}

impl From<&ConfigSpace> for SpaceDoc {
    fn from(space: &ConfigSpace) -> Self {
        let params = space
            .params
            .iter()
            .map(|p| match &p.kind {
                ParamKind::Continuous { lower, upper, log } => ParamDoc {
                    name: p.name.clone(),
                    kind: "continuous".into(),
                    lower: Some(*lower),
                    upper: Some(*upper),
                    log: *log,
                    choices: vec![],
                },
                ParamKind::Integer { lower, upper, log } => ParamDoc {
                    name: p.name.clone(),
                    kind: "integer".into(),
                    lower: Some(*lower as f64),
                    upper: Some(*upper as f64),
                    log: *log,
                    choices: vec![],
                },
                ParamKind::Categorical { choices } => ParamDoc {
                    name: p.name.clone(),
                    kind: "categorical".into(),
                    lower: None,
                    upper: None,
                    log: false,
                    choices: choices.clone(),
                },
            })
            .collect();
        SpaceDoc { params }
    }
}
