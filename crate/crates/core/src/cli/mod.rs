//! Command-line front end: `run`, `diagnose`, `save`, `load`, `tasks export`.
//!
//! Config faults exit with code 1, runtime faults with code 2; either way a
//! single `error[config]: ...` or `error[runtime]: ...` line goes to stderr.

pub mod bundle;
pub mod config;
pub mod csv;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::diagnostics::run_diagnostics;
use crate::experiment::{predict_normalized, run_experiment, ExperimentOutcome};
use crate::par::{self, ExecutionMode};
use crate::readout;
use crate::TimeSeries;

use bundle::{BundleError, ModelBundle};
use config::{Config, PointConfig};

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    /// Single machine-parseable line.
    pub fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        let flat: Vec<&str> = msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        format!("error[{kind}]: {}", flat.join(" "))
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn runtime(e: crate::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rescomp", version, about = "Reservoir computing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Global seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and trials.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate every sweep point.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write states.csv.
        #[arg(long)]
        emit_states: bool,
    },
    /// Echo-state, separation, reproducibility and memory diagnostics.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
    /// Train the configured model and write a model bundle.
    Save {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Load a model bundle and predict the configured task's test segment.
    Load {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Task dataset utilities.
    Tasks {
        #[command(subcommand)]
        action: TasksAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum TasksAction {
    /// Write the configured task's raw input/target series to task.csv.
    Export {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Config(e.to_string());
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

/// Runs a command and returns the human-readable summary.
pub fn execute(command: &Command) -> Result<String, CliError> {
    let started = Instant::now();
    let mut summary = match command {
        Command::Run { common, emit_states } => cmd_run(common, *emit_states)?,
        Command::Diagnose { common } => cmd_diagnose(common)?,
        Command::Save { common, model } => cmd_save(common, model)?,
        Command::Load { common, model } => cmd_load(common, model)?,
        Command::Tasks {
            action: TasksAction::Export { common },
        } => cmd_export(common)?,
    };
    summary.push_str(&format!("elapsed {:.3} s\n", started.elapsed().as_secs_f64()));
    Ok(summary)
}

fn out_dir(common: &Common, cfg: &Config) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn single_point<'a>(cfg: &'a Config, command: &str) -> Result<&'a PointConfig, CliError> {
    if !cfg.sweeps.is_empty() {
        return Err(CliError::Config(format!(
            "{}: `{command}` does not accept [[sweep]] declarations",
            cfg.path.display()
        )));
    }
    Ok(cfg.base())
}

fn run_points(cfg: &Config, workers: Option<usize>) -> Result<Vec<(PointConfig, ExperimentOutcome)>, CliError> {
    let points = cfg.points.clone();
    par::with_workers(workers.or(cfg.workers), || {
        ExecutionMode::Parallel.try_map(points, |p| {
            run_experiment(&p.experiment)
                .map(|o| (p.clone(), o))
                .map_err(|e| CliError::Runtime(format!("point {}: {e}", p.index)))
        })
    })
}

fn describe(p: &PointConfig) -> String {
    if p.assignments.is_empty() {
        String::new()
    } else {
        let parts: Vec<String> = p.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(" [{}]", parts.join(", "))
    }
}

pub fn cmd_run(common: &Common, emit_states: bool) -> Result<String, CliError> {
    let cfg = Config::load(&common.config, common.seed)?;
    let results = run_points(&cfg, common.workers)?;
    let dir = out_dir(common, &cfg);
    csv::write(&dir, "metrics.csv", &csv::metrics_csv(&results))?;
    let preds: Vec<_> = results
        .iter()
        .map(|(p, o)| (p.index, o.test_start, &o.task.target, &o.predictions))
        .collect();
    csv::write(&dir, "predictions.csv", &csv::predictions_csv(&preds))?;
    if emit_states {
        csv::write(&dir, "states.csv", &csv::states_csv(&results))?;
    }
    let mut s = String::new();
    for (p, o) in &results {
        let m = &o.metrics;
        s.push_str(&format!(
            "point {}{}: {} on {} | train NMSE {:.6e} | test NMSE {:.6e} | persistence NMSE {:.6e}\n",
            p.index,
            describe(p),
            p.experiment.backend.kind().as_str(),
            p.experiment.task.kind.as_str(),
            m.train_nmse,
            m.test_nmse,
            m.persistence_nmse
        ));
    }
    s.push_str(&format!("wrote {} point(s) to {}\n", results.len(), dir.display()));
    Ok(s)
}

pub fn cmd_diagnose(common: &Common) -> Result<String, CliError> {
    let cfg = Config::load(&common.config, common.seed)?;
    let point = single_point(&cfg, "diagnose")?;
    let backend = point.experiment.backend.build().map_err(runtime)?;
    let report = par::with_workers(common.workers.or(cfg.workers), || {
        run_diagnostics(&backend, &point.diagnostics, ExecutionMode::Parallel)
    })
    .map_err(runtime)?;
    let dir = out_dir(common, &cfg);
    csv::write(&dir, "diagnostics.csv", &csv::diagnostics_csv(&report))?;
    csv::write(
        &dir,
        "memory_profile.csv",
        &csv::memory_profile_csv(&report.memory_profile),
    )?;
    Ok(format!(
        "echo state: {} (final distance {:.3e})\nseparation {:.6e} | reproducibility {:.6e} | memory capacity {:.4}\nwrote diagnostics to {}\n",
        report
            .esp_convergence_step
            .map_or_else(|| "not converged".to_string(), |s| format!("converged at step {s}")),
        report.esp_final_distance,
        report.separation_score,
        report.reproducibility_score,
        report.memory_capacity,
        dir.display()
    ))
}

/// Trains the base configuration and returns the model bundle with its outcome.
pub fn train_bundle(point: &PointConfig) -> Result<(ModelBundle, ExperimentOutcome), CliError> {
    let outcome = run_experiment(&point.experiment).map_err(runtime)?;
    let bundle = ModelBundle {
        backend: point.experiment.backend.clone(),
        include_input: point.experiment.include_input,
        readout: outcome.readout.clone(),
        input_normalization: outcome.task.input_normalization,
        target_normalization: outcome.task.target_normalization,
    };
    Ok((bundle, outcome))
}

pub fn cmd_save(common: &Common, model: &Path) -> Result<String, CliError> {
    let cfg = Config::load(&common.config, common.seed)?;
    let point = single_point(&cfg, "save")?;
    let (bundle, outcome) = train_bundle(point)?;
    bundle.save(model)?;
    Ok(format!(
        "saved {} model to {} (test NMSE {:.6e})\n",
        bundle.backend.kind().as_str(),
        model.display(),
        outcome.metrics.test_nmse
    ))
}

/// Test-segment predictions of a loaded bundle on the configured task,
/// de-normalised; returns the first test step as well.
pub fn predict_with_bundle(
    bundle: &ModelBundle,
    point: &PointConfig,
) -> Result<(usize, crate::tasks::TaskData, TimeSeries), CliError> {
    bundle.check_compatible(&point.experiment.backend)?;
    let backend = bundle.rebuild()?;
    let task = point.experiment.task.generate().map_err(runtime)?;
    let input = bundle.input_normalization.apply_series(&task.input).map_err(runtime)?;
    let all = predict_normalized(&backend, &bundle.readout, &input, bundle.include_input).map_err(runtime)?;
    let total = task.input.len();
    let start = (total as f64 * point.experiment.train_fraction).floor() as usize;
    if start == 0 || start >= total {
        return Err(CliError::Config("train_fraction leaves no test segment".into()));
    }
    let tn = bundle.target_normalization;
    let test = all.rows(start, total - start).map(|v| tn.invert(v));
    let series = TimeSeries::new(test, task.input.dt()).map_err(runtime)?;
    Ok((start, task, series))
}

pub fn cmd_load(common: &Common, model: &Path) -> Result<String, CliError> {
    let cfg = Config::load(&common.config, common.seed)?;
    let point = single_point(&cfg, "load")?;
    let bundle = ModelBundle::load(model)?;
    let (start, task, predictions) = predict_with_bundle(&bundle, point)?;
    let target = task.target.slice(start, task.target.len()).map_err(runtime)?;
    let nmse = readout::nmse(&predictions, &target).map_err(runtime)?;
    let dir = out_dir(common, &cfg);
    csv::write(
        &dir,
        "predictions.csv",
        &csv::predictions_csv(&[(0, start, &task.target, &predictions)]),
    )?;
    Ok(format!(
        "loaded {} model from {} | test NMSE {:.6e}\nwrote predictions to {}\n",
        bundle.backend.kind().as_str(),
        model.display(),
        nmse,
        dir.display()
    ))
}

pub fn cmd_export(common: &Common) -> Result<String, CliError> {
    let cfg = Config::load(&common.config, common.seed)?;
    let point = single_point(&cfg, "tasks export")?;
    let data = point.experiment.task.generate().map_err(runtime)?;
    let dir = out_dir(common, &cfg);
    csv::write(&dir, "task.csv", &csv::task_csv(&data))?;
    Ok(format!(
        "exported {} ({} steps) to {}\n",
        point.experiment.task.kind.as_str(),
        data.input.len(),
        dir.join("task.csv").display()
    ))
}
