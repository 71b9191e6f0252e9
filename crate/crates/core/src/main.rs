use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flexhb::bench::{SyntheticSpec, TabularBenchmark, ToySpec};
use flexhb::harness::{
    compare, read_trajectory_csv, run, write_run_dir, BenchmarkSpec, ExperimentConfig, HarnessError, Result,
};

#[derive(Parser, Debug)]
#[command(name = "flexhb", version, about = "Multi-fidelity hyperparameter optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Speed-up table over several run directories.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "hb")]
        reference: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate benchmark definitions.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
    /// Print artifacts of a finished run.
    Report {
        #[command(subcommand)]
        what: ReportCommand,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Toy benchmark spec, usable as the `benchmark` field of a config.
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        phi: f64,
    },
    /// Synthetic tabular benchmark file.
    GenTabular {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 27)]
        epochs: u32,
        /// Make early and final metrics anti-correlated.
        #[arg(long)]
        crossing: bool,
    },
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    Weights {
        #[arg(long)]
        run: PathBuf,
    },
    Trajectory {
        #[arg(long)]
        run: PathBuf,
    },
}

fn run_one(config: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let result = run(&cfg)?;
    write_run_dir(out, &cfg, &result)?;
    println!("{}", serde_json::to_string_pretty(&result.summary())?);
    Ok(())
}

fn compare_runs(dirs: &[PathBuf], reference: &str, out: Option<&Path>) -> Result<()> {
    let mut by_method: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for dir in dirs {
        let cfg = ExperimentConfig::load(dir.join("config.json"))?;
        let traj = read_trajectory_csv(fs::File::open(dir.join("trajectory.csv"))?)?;
        by_method.entry(cfg.method.name()).or_default().push((cfg.seed, traj));
    }
    let table = compare(&by_method, reference)?;
    print!("{}", table.to_table());
    if let Some(path) = out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "runs", "mean_final", "time_to_target", "speedup"])?;
        for row in &table.rows {
            w.write_record([
                row.method.clone(),
                row.runs.to_string(),
                row.mean_final.to_string(),
                row.time_to_target.map_or(String::new(), |t| t.to_string()),
                row.speedup.map_or("F".to_string(), |s| s.to_string()),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn bench(what: BenchCommand) -> Result<()> {
    match what {
        BenchCommand::GenToy { out, phi } => {
            let spec = BenchmarkSpec::Toy(ToySpec { phi, ..ToySpec::default() });
            fs::write(out, serde_json::to_string_pretty(&spec)?)?;
        }
        BenchCommand::GenTabular {
            out,
            seed,
            grid,
            epochs,
            crossing,
        } => {
            let spec = SyntheticSpec {
                seed,
                grid,
                epochs,
                crossing,
                ..SyntheticSpec::default()
            };
            fs::write(out, TabularBenchmark::synthetic(&spec).to_json_string())?;
        }
    }
    Ok(())
}

fn report(what: ReportCommand) -> Result<()> {
    let (dir, file) = match &what {
        ReportCommand::Weights { run } => (run, "weights.csv"),
        ReportCommand::Trajectory { run } => (run, "trajectory.csv"),
    };
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run_one(&config, &out),
        Command::Compare { runs, reference, out } => compare_runs(&runs, &reference, out.as_deref()),
        Command::Bench { what } => bench(what),
        Command::Report { what } => report(what),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
