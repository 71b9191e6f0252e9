use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use flexhb::exec::{EvalError, EvaluationRequest, Evaluator, SubprocessEvaluator};
use flexhb::harness::{run, BenchmarkSpec, ExperimentConfig, Method, Overrides};
use flexhb::space::{ConfigId, Configuration, Origin, ParamValue};

const ECHO: &str = env!("CARGO_BIN_EXE_flexhb-echo-evaluator");

fn config(id: u64) -> Configuration {
    let mut values = BTreeMap::new();
    values.insert("x".to_string(), ParamValue::Float(0.5));
    Configuration {
        id: ConfigId(id),
        values,
        origin: Origin::Random,
    }
}

fn echo(args: &[&str], root: &Path) -> SubprocessEvaluator {
    let mut command = vec![ECHO.to_string()];
    command.extend(args.iter().map(|s| s.to_string()));
    SubprocessEvaluator::new(&command, root).unwrap()
}

fn trained(root: &Path, id: u64) -> Vec<u32> {
    fs::read_to_string(root.join(format!("config-{id}")).join("trained.log"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect()
}

#[test]
fn replays_curve_at_every_report_point() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.json");
    let curve: Vec<f64> = (1..=9).map(|e| 1.0 / e as f64).collect();
    fs::write(&curves, serde_json::json!({ "7": curve }).to_string()).unwrap();
    let mut ev = echo(&["--curves", curves.to_str().unwrap()], dir.path());
    let reports = ev.evaluate(&EvaluationRequest::new(&config(7), 0, 9, vec![3, 6, 9])).unwrap();
    let got: Vec<(u32, f64)> = reports.iter().map(|r| (r.resource, r.metric)).collect();
    assert_eq!(got, vec![(3, curve[2]), (6, curve[5]), (9, curve[8])]);
    assert!(reports.windows(2).all(|w| w[0].elapsed <= w[1].elapsed));
}

#[test]
fn resume_skips_trained_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let mut ev = echo(&[], dir.path());
    let c = config(3);
    let first = ev.evaluate(&EvaluationRequest::new(&c, 0, 3, vec![1, 2, 3])).unwrap();
    assert_eq!(first.len(), 3);
    let second = ev.evaluate(&EvaluationRequest::new(&c, 3, 9, vec![6, 9])).unwrap();
    assert_eq!(second.iter().map(|r| r.resource).collect::<Vec<_>>(), vec![6, 9]);
    assert_eq!(trained(dir.path(), 3), (1..=9).collect::<Vec<_>>());
    // resuming from a point the checkpoint does not hold is refused
    let stale = ev.evaluate(&EvaluationRequest::new(&c, 3, 27, vec![27]));
    assert!(matches!(stale, Err(EvalError::Exit(_))));
}

#[test]
fn killed_child_is_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut ev = echo(&["--die-after", "1"], dir.path());
    let err = ev.evaluate(&EvaluationRequest::new(&config(1), 0, 9, vec![3, 6, 9])).unwrap_err();
    assert!(matches!(err, EvalError::Exit(_)), "{err:?}");
}

#[test]
fn full_run_through_subprocess() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        method: Method::Hb,
        benchmark: BenchmarkSpec::Subprocess {
            command: vec![ECHO.to_string()],
            space: serde_json::json!({
                "params": [
                    { "name": "x", "kind": "continuous", "lower": -1.0, "upper": 1.0 },
                    { "name": "y", "kind": "continuous", "lower": -1.0, "upper": 1.0 }
                ]
            }),
            r_max: 9,
            checkpoint_root: Some(dir.path().to_path_buf()),
        },
        max_outer_loops: Some(1),
        overrides: Overrides {
            fgf: Some(true),
            ..Default::default()
        },
        ..Default::default()
    };
    let result = run(&cfg).unwrap();
    assert_eq!(result.counters.failures, 0);
    // every configuration trained each epoch exactly once
    for id in 0..result.store.num_configs() as u64 {
        let epochs = trained(dir.path(), id);
        let upto = result.store.trained_resource(ConfigId(id));
        assert_eq!(epochs, (1..=upto).collect::<Vec<_>>(), "config {id}");
    }
    assert_eq!(
        result.counters.training_units,
        (0..result.store.num_configs() as u64)
            .map(|id| result.store.trained_resource(ConfigId(id)) as u64)
            .sum::<u64>()
    );
}
