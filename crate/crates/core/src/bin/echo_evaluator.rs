//! Reference evaluator for the subprocess protocol. Replays stored curves,
//! keeps its training progress in the checkpoint directory, and can be told
//! to crash for fault-injection tests.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use flexhb::exec::{EvaluationRequest, CHECKPOINT_ENV};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(about = "Replays learning curves over the flexhb evaluator protocol")]
struct Args {
    /// JSON object mapping config id to a per-epoch metric list.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Abort after emitting this many reports.
    #[arg(long)]
    die_after: Option<usize>,
    /// Only inject the crash for this config id.
    #[arg(long)]
    die_on: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct State {
    trained: u32,
}

fn metric(curves: &BTreeMap<String, Vec<f64>>, req: &EvaluationRequest, epoch: u32) -> Result<f64, String> {
    if let Some(curve) = curves.get(&req.config.id.0.to_string()) {
        return curve
            .get(epoch as usize - 1)
            .copied()
            .ok_or_else(|| format!("curve for {} has no epoch {epoch}", req.config.id));
    }
    let quality: f64 = req.config.params.values().filter_map(|v| v.as_f64()).map(|v| v * v).sum();
    Ok(quality + 1.0 / epoch as f64)
}

fn load_state(dir: &Path) -> Result<State, String> {
    match fs::read_to_string(dir.join("state.json")) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| e.to_string()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(State::default()),
        Err(e) => Err(e.to_string()),
    }
}

fn serve(args: &Args) -> Result<(), String> {
    let curves: BTreeMap<String, Vec<f64>> = match &args.curves {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| e.to_string())?
        }
        None => BTreeMap::new(),
    };
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line).map_err(|e| e.to_string())?;
    let req: EvaluationRequest = serde_json::from_str(&line).map_err(|e| format!("bad request: {e}"))?;
    let dir = req
        .checkpoint_dir
        .clone()
        .or_else(|| std::env::var_os(CHECKPOINT_ENV).map(PathBuf::from))
        .ok_or("no checkpoint directory")?;
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;

    let state = load_state(&dir)?;
    if state.trained != req.resume_from {
        return Err(format!(
            "checkpoint holds {} epochs, request resumes from {}",
            state.trained, req.resume_from
        ));
    }
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("trained.log"))
        .map_err(|e| e.to_string())?;
    let crash = args.die_on.is_none_or(|id| id == req.config.id.0);
    let mut out = io::stdout().lock();
    let mut emitted = 0;
    for epoch in req.resume_from + 1..=req.target {
        writeln!(log, "{epoch}").map_err(|e| e.to_string())?;
        if !req.report_at.contains(&epoch) {
            continue;
        }
        if crash && args.die_after == Some(emitted) {
            out.flush().ok();
            std::process::abort();
        }
        let y = metric(&curves, &req, epoch)?;
        writeln!(out, "{}", serde_json::json!({ "resource": epoch, "metric": y })).map_err(|e| e.to_string())?;
        out.flush().map_err(|e| e.to_string())?;
        emitted += 1;
        let state = State { trained: epoch };
        fs::write(dir.join("state.json"), serde_json::to_string(&state).expect("state serializes"))
            .map_err(|e| e.to_string())?;
    }
    writeln!(out, "{}", serde_json::json!({ "done": true })).map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match serve(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("echo-evaluator: {e}");
            ExitCode::from(2)
        }
    }
}
