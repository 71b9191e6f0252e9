//! Measurement store: per-fidelity datasets, incumbent tracking, the
//! elimination archive used by global-ranking successive halving, and the
//! JSON-lines history file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ConfigId, ConfigSpace, Configuration, Origin};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("measurement for config {0} has resource 0")]
    ZeroResource(ConfigId),
    #[error("measurement for config {0} has a non-finite metric")]
    NonFinite(ConfigId),
    #[error("unknown configuration {0}")]
    UnknownConfig(ConfigId),
    #[error("configuration {id} is invalid: {source}")]
    InvalidConfig {
        id: ConfigId,
        source: crate::space::SpaceError,
    },
    #[error("configuration id {0} registered twice with different values")]
    ConflictingConfig(ConfigId),
    #[error("history line {line}: {msg} (last valid line: {last_valid})")]
    Parse {
        line: usize,
        last_valid: usize,
        msg: String,
    },
    #[error("history file is empty (missing header line)")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RecordError>;

/// One evaluation result. Lower metric is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub config_id: ConfigId,
    pub resource: u32,
    pub metric: f64,
    #[serde(rename = "vtime")]
    pub virtual_time: f64,
    #[serde(rename = "bracket")]
    pub bracket_id: u32,
    #[serde(rename = "checkpoint")]
    pub is_checkpoint: bool,
}

/// A training point for surrogate fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub config_id: ConfigId,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Immutable snapshot of the per-resource datasets, each level sorted by
/// configuration id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FidelityDatasets {
    levels: BTreeMap<u32, Vec<Point>>,
}

impl FidelityDatasets {
    pub fn from_levels(levels: BTreeMap<u32, Vec<Point>>) -> Self {
        let levels = levels
            .into_iter()
            .filter(|(_, pts)| !pts.is_empty())
            .map(|(r, mut pts)| {
                pts.sort_by_key(|p| p.config_id);
                (r, pts)
            })
            .collect();
        Self { levels }
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn resources(&self) -> Vec<u32> {
        self.levels.keys().copied().collect()
    }

    pub fn level(&self, r: u32) -> &[Point] {
        self.levels.get(&r).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[Point])> {
        self.levels.iter().map(|(r, p)| (*r, p.as_slice()))
    }

    /// Highest populated resource level.
    pub fn top(&self) -> Option<u32> {
        self.levels.keys().next_back().copied()
    }

    pub fn sizes(&self) -> BTreeMap<u32, usize> {
        self.levels.iter().map(|(r, p)| (*r, p.len())).collect()
    }

    /// Keeps only the listed resource levels.
    pub fn restrict(&self, keep: impl Fn(u32) -> bool) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .filter(|(r, _)| keep(**r))
                .map(|(r, p)| (*r, p.clone()))
                .collect(),
        }
    }

    pub fn paired_metrics(&self, r_low: u32, r_high: u32) -> Vec<(f64, f64)> {
        let low: BTreeMap<ConfigId, f64> =
            self.level(r_low).iter().map(|p| (p.config_id, p.y)).collect();
        self.level(r_high)
            .iter()
            .filter_map(|p| low.get(&p.config_id).map(|&yl| (yl, p.y)))
            .collect()
    }
}

/// Configurations stopped at each resource level, with their metric there.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EliminationArchive {
    levels: BTreeMap<u32, BTreeMap<ConfigId, f64>>,
}

impl EliminationArchive {
    pub fn level(&self, r: u32) -> Vec<(ConfigId, f64)> {
        self.levels
            .get(&r)
            .map(|m| m.iter().map(|(id, y)| (*id, *y)).collect())
            .unwrap_or_default()
    }

    pub fn replace_level(&mut self, r: u32, entries: impl IntoIterator<Item = (ConfigId, f64)>) {
        let m: BTreeMap<ConfigId, f64> = entries.into_iter().collect();
        if m.is_empty() {
            self.levels.remove(&r);
        } else {
            self.levels.insert(r, m);
        }
    }

    pub fn insert(&mut self, r: u32, id: ConfigId, y: f64) {
        self.levels.entry(r).or_default().insert(id, y);
    }

    pub fn contains(&self, id: ConfigId) -> bool {
        self.levels.values().any(|m| m.contains_key(&id))
    }

    pub fn len(&self) -> usize {
        self.levels.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, ConfigId, f64)> + '_ {
        self.levels
            .iter()
            .flat_map(|(r, m)| m.iter().map(move |(id, y)| (*r, *id, *y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub vtime: f64,
    pub best_metric: f64,
    pub config_id: ConfigId,
}

/// Best full-fidelity metric over virtual time. Non-increasing in metric,
/// strictly increasing in time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IncumbentTrajectory {
    points: Vec<TrajectoryPoint>,
}

impl IncumbentTrajectory {
    pub fn from_points(points: Vec<TrajectoryPoint>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn offer(&mut self, vtime: f64, metric: f64, id: ConfigId) {
        match self.points.last_mut() {
            Some(last) if metric >= last.best_metric => {}
            Some(last) if vtime <= last.vtime => {
                last.best_metric = metric;
                last.config_id = id;
            }
            _ => self.points.push(TrajectoryPoint {
                vtime,
                best_metric: metric,
                config_id: id,
            }),
        }
    }

    /// Best metric reached at or before `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.points
            .iter()
            .take_while(|p| p.vtime <= t)
            .last()
            .map(|p| p.best_metric)
    }

    /// First time the incumbent is at or below `target`.
    pub fn time_to_target(&self, target: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.best_metric <= target)
            .map(|p| p.vtime)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConfigEntry {
    config: Configuration,
    x: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub method: String,
}

/// Single-owner store of everything observed during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStore {
    space: ConfigSpace,
    r_max: u32,
    meta: RunMeta,
    configs: BTreeMap<ConfigId, ConfigEntry>,
    log: Vec<Measurement>,
    levels: BTreeMap<u32, BTreeMap<ConfigId, f64>>,
    incumbent: Option<(ConfigId, f64)>,
    trajectory: IncumbentTrajectory,
    archive: EliminationArchive,
    failed: BTreeSet<ConfigId>,
}

impl RunStore {
    pub fn new(space: ConfigSpace, r_max: u32) -> Self {
        Self {
            space,
            r_max,
            meta: RunMeta::default(),
            configs: BTreeMap::new(),
            log: Vec::new(),
            levels: BTreeMap::new(),
            incumbent: None,
            trajectory: IncumbentTrajectory::default(),
            archive: EliminationArchive::default(),
            failed: BTreeSet::new(),
        }
    }

    pub fn with_meta(mut self, meta: RunMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn r_max(&self) -> u32 {
        self.r_max
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn register(&mut self, config: Configuration) -> Result<()> {
        let x = self
            .space
            .encode(&config)
            .map_err(|source| RecordError::InvalidConfig { id: config.id, source })?;
        if let Some(existing) = self.configs.get(&config.id) {
            if existing.config.values != config.values {
                return Err(RecordError::ConflictingConfig(config.id));
            }
        }
        self.configs.insert(config.id, ConfigEntry { config, x });
        Ok(())
    }

    pub fn config(&self, id: ConfigId) -> Option<&Configuration> {
        self.configs.get(&id).map(|e| &e.config)
    }

    pub fn encoded(&self, id: ConfigId) -> Option<&[f64]> {
        self.configs.get(&id).map(|e| e.x.as_slice())
    }

    pub fn set_origin(&mut self, id: ConfigId, origin: Origin) {
        if let Some(e) = self.configs.get_mut(&id) {
            e.config.origin = origin;
        }
    }

    pub fn num_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn record(&mut self, m: Measurement) -> Result<()> {
        if m.resource == 0 {
            return Err(RecordError::ZeroResource(m.config_id));
        }
        if !m.metric.is_finite() {
            return Err(RecordError::NonFinite(m.config_id));
        }
        if !self.configs.contains_key(&m.config_id) {
            return Err(RecordError::UnknownConfig(m.config_id));
        }
        let replaced = self
            .levels
            .entry(m.resource)
            .or_default()
            .insert(m.config_id, m.metric)
            .is_some();
        if m.resource == self.r_max {
            if replaced {
                self.incumbent = self.levels[&self.r_max]
                    .iter()
                    .map(|(id, y)| (*id, *y))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            } else if self.incumbent.is_none_or(|(_, best)| m.metric < best) {
                self.incumbent = Some((m.config_id, m.metric));
            }
            self.trajectory.offer(m.virtual_time, m.metric, m.config_id);
        }
        self.log.push(m);
        Ok(())
    }

    pub fn mark_failed(&mut self, id: ConfigId) {
        self.failed.insert(id);
    }

    pub fn is_failed(&self, id: ConfigId) -> bool {
        self.failed.contains(&id)
    }

    pub fn failed(&self) -> &BTreeSet<ConfigId> {
        &self.failed
    }

    pub fn incumbent(&self) -> Option<(ConfigId, f64)> {
        self.incumbent
    }

    pub fn trajectory(&self) -> &IncumbentTrajectory {
        &self.trajectory
    }

    pub fn archive(&self) -> &EliminationArchive {
        &self.archive
    }

    pub fn archive_mut(&mut self) -> &mut EliminationArchive {
        &mut self.archive
    }

    /// Raw measurement log in insertion order, replacements included.
    pub fn log(&self) -> &[Measurement] {
        &self.log
    }

    pub fn metric_at(&self, id: ConfigId, r: u32) -> Option<f64> {
        self.levels.get(&r).and_then(|m| m.get(&id)).copied()
    }

    /// Highest resource at which the configuration has been measured (0 if never).
    pub fn trained_resource(&self, id: ConfigId) -> u32 {
        self.levels
            .iter()
            .rev()
            .find(|(_, m)| m.contains_key(&id))
            .map_or(0, |(r, _)| *r)
    }

    pub fn dataset_sizes(&self) -> BTreeMap<u32, usize> {
        self.levels
            .iter()
            .filter(|(_, m)| !m.is_empty())
            .map(|(r, m)| (*r, m.len()))
            .collect()
    }

    /// Snapshot of the datasets with encoded inputs; failed configurations excluded.
    pub fn datasets(&self) -> FidelityDatasets {
        let levels = self
            .levels
            .iter()
            .map(|(r, m)| {
                let pts = m
                    .iter()
                    .filter(|(id, _)| !self.failed.contains(id))
                    .map(|(id, y)| Point {
                        config_id: *id,
                        x: self.configs[id].x.clone(),
                        y: *y,
                    })
                    .collect();
                (*r, pts)
            })
            .collect();
        FidelityDatasets::from_levels(levels)
    }

    pub fn paired_metrics(&self, r_low: u32, r_high: u32) -> Vec<(f64, f64)> {
        let (Some(low), Some(high)) = (self.levels.get(&r_low), self.levels.get(&r_high)) else {
            return Vec::new();
        };
        high.iter()
            .filter_map(|(id, yh)| low.get(id).map(|yl| (*yl, *yh)))
            .collect()
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_history(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_history<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = Header {
            flexhb_history: 1,
            seed: self.meta.seed,
            space_hash: self.space.fingerprint(),
            method: self.meta.method.clone(),
            r_max: self.r_max,
            space: self.space.to_json_value(),
        };
        write_line(w, &header)?;
        for e in self.configs.values() {
            write_line(w, &ConfigLine { config: e.config.clone() })?;
        }
        for m in &self.log {
            write_line(w, m)?;
        }
        for id in &self.failed {
            write_line(w, &FailedLine { failed: *id })?;
        }
        for (resource, config_id, metric) in self.archive.entries() {
            write_line(
                w,
                &ArchiveLine {
                    archive: ArchiveEntry {
                        resource,
                        config_id,
                        metric,
                    },
                },
            )?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_history(BufReader::new(File::open(path)?))
    }

    pub fn read_history<R: BufRead>(reader: R) -> Result<Self> {
        let mut store: Option<RunStore> = None;
        let mut last_valid = 0;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let parse_err = |msg: String| RecordError::Parse {
                line: lineno,
                last_valid,
                msg,
            };
            if line.trim().is_empty() {
                continue;
            }
            match store.as_mut() {
                None => {
                    let h: Header = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
                    let space = ConfigSpace::from_json_value(h.space).map_err(|e| parse_err(e.to_string()))?;
                    store = Some(RunStore::new(space, h.r_max).with_meta(RunMeta {
                        seed: h.seed,
                        method: h.method,
                    }));
                }
                Some(s) => {
                    let parsed: Line = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
                    match parsed {
                        Line::Config { config } => s.register(config),
                        Line::Failed { failed } => {
                            s.mark_failed(failed);
                            Ok(())
                        }
                        Line::Archive { archive } => {
                            s.archive.insert(archive.resource, archive.config_id, archive.metric);
                            Ok(())
                        }
                        Line::Measurement(m) => s.record(m),
                    }
                    .map_err(|e| parse_err(e.to_string()))?;
                }
            }
            last_valid = lineno;
        }
        store.ok_or(RecordError::MissingHeader)
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Header {
    flexhb_history: u32,
    seed: u64,
    space_hash: String,
    method: String,
    r_max: u32,
    space: serde_json::Value,
}

#[derive(Serialize)]
struct ConfigLine {
    config: Configuration,
}

#[derive(Serialize)]
struct FailedLine {
    failed: ConfigId,
}

#[derive(Serialize, Deserialize)]
struct ArchiveEntry {
    resource: u32,
    config_id: ConfigId,
    metric: f64,
}

#[derive(Serialize)]
struct ArchiveLine {
    archive: ArchiveEntry,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Config { config: Configuration },
    Failed { failed: ConfigId },
    Archive { archive: ArchiveEntry },
    Measurement(Measurement),
}
