use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Instant;

use serde::Deserialize;

use super::{EvalError, EvaluationRequest, Evaluator, Report};

/// Environment variable naming the per-configuration checkpoint directory.
pub const CHECKPOINT_ENV: &str = "FLEXHB_CHECKPOINT_DIR";

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Message {
    Report { resource: u32, metric: f64 },
    Done { done: bool },
}

/// Runs an external trainer per request. The request goes to the child's
/// stdin as one JSON line; the child answers with `{"resource", "metric"}`
/// lines followed by `{"done": true}`. Elapsed times are wall-clock.
#[derive(Debug, Clone)]
pub struct SubprocessEvaluator {
    program: PathBuf,
    args: Vec<String>,
    checkpoint_root: PathBuf,
}

impl SubprocessEvaluator {
    pub fn new(command: &[String], checkpoint_root: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| EvalError::InvalidRequest("empty evaluator command".into()))?;
        Ok(Self {
            program: program.into(),
            args: args.to_vec(),
            checkpoint_root: checkpoint_root.into(),
        })
    }

    fn checkpoint_dir(&self, request: &EvaluationRequest) -> PathBuf {
        request
            .checkpoint_dir
            .clone()
            .unwrap_or_else(|| self.checkpoint_root.join(format!("config-{}", request.config.id)))
    }
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(&mut self, request: &EvaluationRequest) -> Result<Vec<Report>, EvalError> {
        request.validate()?;
        let dir = self.checkpoint_dir(request);
        std::fs::create_dir_all(&dir)?;
        let mut request = request.clone();
        request.checkpoint_dir = Some(dir.clone());

        let started = Instant::now();
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .env(CHECKPOINT_ENV, &dir)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(EvalError::Spawn)?;

        let line = serde_json::to_string(&request).expect("request serializes");
        {
            let mut stdin = child.stdin.take().expect("stdin piped");
            // a child that exits early closes the pipe; its status tells why
            let _ = writeln!(stdin, "{line}");
        }

        let stdout = child.stdout.take().expect("stdout piped");
        let result = read_reports(BufReader::new(stdout), &request, started);
        // a child still writing after a protocol error would block on a full pipe
        let killed = matches!(result, Err(EvalError::Protocol(_))) && child.try_wait()?.is_none() && child.kill().is_ok();
        let status = child.wait()?;
        if !killed && !status.success() {
            return Err(EvalError::Exit(status.to_string()));
        }
        result
    }
}

fn read_reports<R: BufRead>(reader: R, request: &EvaluationRequest, started: Instant) -> Result<Vec<Report>, EvalError> {
    let mut reports = Vec::with_capacity(request.report_at.len());
    let mut done = false;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if done {
            return Err(EvalError::Protocol("output after done".into()));
        }
        let msg: Message =
            serde_json::from_str(&line).map_err(|e| EvalError::Protocol(format!("{e}: {line}")))?;
        match msg {
            Message::Report { resource, metric } => {
                let expected = request.report_at.get(reports.len());
                if expected != Some(&resource) {
                    return Err(EvalError::Protocol(format!(
                        "unexpected report at resource {resource}, wanted {expected:?}"
                    )));
                }
                if !metric.is_finite() {
                    return Err(EvalError::Protocol(format!("non-finite metric at {resource}")));
                }
                reports.push(Report {
                    resource,
                    metric,
                    elapsed: started.elapsed().as_secs_f64(),
                });
            }
            Message::Done { done: true } => done = true,
            Message::Done { done: false } => {
                return Err(EvalError::Protocol("done must be true".into()));
            }
        }
    }
    if !done {
        return Err(EvalError::MissingDone);
    }
    if reports.len() != request.report_at.len() {
        return Err(EvalError::Protocol(format!(
            "{} of {} report points delivered",
            reports.len(),
            request.report_at.len()
        )));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ConfigId, Configuration, Origin};

    fn request() -> EvaluationRequest {
        let c = Configuration {
            id: ConfigId(1),
            values: Default::default(),
            origin: Origin::Random,
        };
        EvaluationRequest::new(&c, 0, 9, vec![3, 6, 9])
    }

    fn parse(text: &str) -> Result<Vec<Report>, EvalError> {
        read_reports(text.as_bytes(), &request(), Instant::now())
    }

    #[test]
    fn well_formed_stream() {
        let r = parse("{\"resource\":3,\"metric\":0.5}\n{\"resource\":6,\"metric\":0.4}\n\n{\"resource\":9,\"metric\":0.3}\n{\"done\":true}\n").unwrap();
        assert_eq!(r.iter().map(|x| x.resource).collect::<Vec<_>>(), vec![3, 6, 9]);
    }

    #[test]
    fn malformed_streams() {
        assert!(matches!(parse("{\"resource\":3,\"metric\":0.5}\n"), Err(EvalError::MissingDone)));
        assert!(matches!(parse("{\"resource\":6,\"metric\":0.5}\n{\"done\":true}\n"), Err(EvalError::Protocol(_))));
        assert!(matches!(parse("garbage\n"), Err(EvalError::Protocol(_))));
        assert!(matches!(parse("{\"resource\":3,\"metric\":0.5}\n{\"done\":true}\n"), Err(EvalError::Protocol(_))));
        assert!(matches!(
            parse("{\"resource\":3,\"metric\":1}\n{\"resource\":6,\"metric\":1}\n{\"resource\":9,\"metric\":1}\n{\"done\":true}\n{\"done\":true}\n"),
            Err(EvalError::Protocol(_))
        ));
    }

    #[test]
    fn endless_garbage_is_cut_off() {
        let dir = tempfile::tempdir().unwrap();
        let mut ev = SubprocessEvaluator::new(&["yes".to_string(), "garbage".to_string()], dir.path()).unwrap();
        assert!(matches!(ev.evaluate(&request()), Err(EvalError::Protocol(_))));
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut ev = SubprocessEvaluator::new(&["/nonexistent/evaluator".to_string()], dir.path()).unwrap();
        assert!(matches!(ev.evaluate(&request()), Err(EvalError::Spawn(_))));
        assert!(SubprocessEvaluator::new(&[], dir.path()).is_err());
    }
}
