use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::config::ExperimentConfig;
use super::run::RunResult;
use super::Result;
use crate::ensemble::WeightLog;
use crate::records::{IncumbentTrajectory, TrajectoryPoint};

pub fn write_trajectory_csv<W: Write>(traj: &IncumbentTrajectory, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["vtime", "best_metric", "config_id"])?;
    for p in traj.points() {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

/// Several runs in one file, with a leading `seed` column.
pub fn write_merged_trajectory_csv<W: Write>(runs: &[(u64, &IncumbentTrajectory)], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["seed", "vtime", "best_metric", "config_id"])?;
    for (seed, traj) in runs {
        for p in traj.points() {
            out.write_record(&[seed.to_string(), p.vtime.to_string(), p.best_metric.to_string(), p.config_id.0.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<IncumbentTrajectory> {
    let mut reader = csv::Reader::from_reader(r);
    let points = reader.deserialize().collect::<std::result::Result<Vec<TrajectoryPoint>, _>>()?;
    Ok(IncumbentTrajectory::from_points(points))
}

pub fn write_weights_csv<W: Write>(log: &WeightLog, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["iteration", "resource", "weight"])?;
    for row in &log.rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes config.json, history.jsonl, trajectory.csv, weights.csv,
/// brackets.log and summary.json into `dir`.
pub fn write_run_dir(dir: impl AsRef<Path>, cfg: &ExperimentConfig, result: &RunResult) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), cfg.to_json_pretty())?;
    result.store.persist(dir.join("history.jsonl"))?;
    write_trajectory_csv(result.trajectory(), fs::File::create(dir.join("trajectory.csv"))?)?;
    write_weights_csv(&result.weights, fs::File::create(dir.join("weights.csv"))?)?;

    let mut log = BufWriter::new(fs::File::create(dir.join("brackets.log"))?);
    for plan in &result.plans {
        writeln!(log, "{}", serde_json::json!({ "plan": plan }))?;
    }
    for bracket in &result.brackets {
        writeln!(log, "{}", serde_json::json!({ "bracket": bracket }))?;
    }
    log.flush()?;

    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&result.summary())?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ConfigId;

    #[test]
    fn trajectory_csv_round_trip() {
        let traj = IncumbentTrajectory::from_points(vec![
            TrajectoryPoint {
                vtime: 1.5,
                best_metric: 0.3,
                config_id: ConfigId(4),
            },
            TrajectoryPoint {
                vtime: 7.25,
                best_metric: 0.1,
                config_id: ConfigId(9),
            },
        ]);
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vtime,best_metric,config_id\n"));
        assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), traj);

        let mut merged = Vec::new();
        write_merged_trajectory_csv(&[(3, &traj), (5, &traj)], &mut merged).unwrap();
        let text = String::from_utf8(merged).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seed,vtime,best_metric,config_id");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[3], "5,1.5,0.3,4");
    }

    #[test]
    fn empty_exports_are_header_only() {
        let mut buf = Vec::new();
        write_trajectory_csv(&IncumbentTrajectory::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "vtime,best_metric,config_id\n");
        let mut buf = Vec::new();
        write_weights_csv(&WeightLog::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,resource,weight\n");
    }
}
