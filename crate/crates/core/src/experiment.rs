//! Train/evaluate driver: generate a task, drive the reservoir once over the
//! whole series, fit the readout on a contiguous training prefix and score
//! the held-out suffix.

use nalgebra::DMatrix;

use crate::backend::{Backend, BackendSpec};
use crate::error::{Error, Result, StageExt};
use crate::readout::{self, Readout, DEFAULT_LAMBDA};
use crate::reservoir::{drive, harvest, harvest_with_input, Reservoir, StateTrajectory, TimeSeries};
use crate::tasks::{TaskData, TaskSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub backend: BackendSpec,
    pub lambda: f64,
    /// Leading training steps excluded from the fit; `None` means 10% of
    /// the training segment.
    pub washout: Option<usize>,
    pub train_fraction: f64,
    /// Append the (normalised) input to the observed states.
    pub include_input: bool,
}

impl ExperimentConfig {
    pub fn new(task: TaskSpec, backend: BackendSpec) -> Self {
        ExperimentConfig {
            task,
            backend,
            lambda: DEFAULT_LAMBDA,
            washout: None,
            train_fraction: 0.7,
            include_input: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub train_nmse: f64,
    pub test_nmse: f64,
    /// `1 - test NMSE`.
    pub test_r2: f64,
    /// NMSE of predicting each test target by the previous target.
    pub persistence_nmse: f64,
    pub lambda: f64,
    pub washout: usize,
    pub train_len: usize,
    pub test_len: usize,
    pub regenerations: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub metrics: Metrics,
    pub readout: Readout,
    pub task: TaskData,
    pub trajectory: StateTrajectory,
    /// Index of the first test step.
    pub test_start: usize,
    /// De-normalised test-segment predictions.
    pub predictions: TimeSeries,
}

/// Task data and reservoir response, ready for one or more readout fits.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub task: TaskData,
    pub trajectory: StateTrajectory,
    design: DMatrix<f64>,
    targets: DMatrix<f64>,
    train_len: usize,
    washout: usize,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
            return Err(Error::param(format!(
                "train fraction {} must lie strictly between 0 and 1",
                config.train_fraction
            )));
        }
        let task = config.task.generate().stage("task")?;
        let backend = config.backend.build().stage("backend")?;
        Self::with_backend(config, &backend, task)
    }

    pub fn with_backend(config: &ExperimentConfig, backend: &Backend, task: TaskData) -> Result<Self> {
        let total = task.input.len();
        let train_len = (total as f64 * config.train_fraction).floor() as usize;
        if train_len == 0 || total - train_len < 2 {
            return Err(Error::param(format!(
                "split of {total} steps at fraction {} leaves an empty segment",
                config.train_fraction
            )));
        }
        let washout = config.washout.unwrap_or(train_len / 10);
        if washout >= train_len {
            return Err(Error::param(format!(
                "washout {washout} must be below training length {train_len}"
            )));
        }
        let input = task.normalized_input().stage("normalise")?;
        let trajectory = drive(backend, &input, None).stage("drive")?;
        let design = design_matrix(&trajectory, &input, config.include_input).stage("harvest")?;
        let tn = task.target_normalization;
        let targets = task.target.data().map(|v| tn.apply(v));
        Ok(Prepared {
            task,
            trajectory,
            design,
            targets,
            train_len,
            washout,
        })
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }

    pub fn washout(&self) -> usize {
        self.washout
    }

    fn rows(&self, start: usize, end: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            self.design.rows(start, end - start).into_owned(),
            self.targets.rows(start, end - start).into_owned(),
        )
    }

    /// Fits on the training segment and scores the test segment.
    pub fn evaluate(&self, lambda: f64) -> Result<ExperimentOutcome> {
        let total = self.design.nrows();
        let (train_x, train_y) = self.rows(self.washout, self.train_len);
        let ro = readout::fit(&train_x, &train_y, lambda).stage("readout")?;

        let tn = self.task.target_normalization;
        let raw = self.task.target.data();
        let train_pred = ro.predict(&train_x)?.map(|v| tn.invert(v));
        let train_nmse = readout::nmse_matrix(
            &train_pred,
            &raw.rows(self.washout, self.train_len - self.washout).into_owned(),
        )
        .stage("metrics")?;

        let (test_x, _) = self.rows(self.train_len, total);
        let test_pred = ro.predict(&test_x)?.map(|v| tn.invert(v));
        let test_target = raw.rows(self.train_len, total - self.train_len).into_owned();
        let test_nmse = readout::nmse_matrix(&test_pred, &test_target).stage("metrics")?;
        let persistence = raw.rows(self.train_len - 1, total - self.train_len).into_owned();
        let persistence_nmse = readout::nmse_matrix(&persistence, &test_target).stage("metrics")?;

        Ok(ExperimentOutcome {
            metrics: Metrics {
                train_nmse,
                test_nmse,
                test_r2: 1.0 - test_nmse,
                persistence_nmse,
                lambda,
                washout: self.washout,
                train_len: self.train_len,
                test_len: total - self.train_len,
                regenerations: self.task.regenerations,
            },
            readout: ro,
            task: self.task.clone(),
            trajectory: self.trajectory.clone(),
            test_start: self.train_len,
            predictions: TimeSeries::new(test_pred, self.task.input.dt())?,
        })
    }

    /// Picks the lambda with the lowest NMSE on the last fifth of the
    /// post-washout training segment, then refits on the full segment.
    pub fn tune(&self, grid: &[f64]) -> Result<ExperimentOutcome> {
        if grid.is_empty() {
            return Err(Error::param("lambda grid is empty"));
        }
        let usable = self.train_len - self.washout;
        let split = self.washout + usable * 4 / 5;
        if split == self.washout || split + 2 > self.train_len {
            return Err(Error::param("training segment too short to tune lambda"));
        }
        let (fit_x, fit_y) = self.rows(self.washout, split);
        let (val_x, val_y) = self.rows(split, self.train_len);
        let mut best: Option<(f64, f64)> = None;
        for &lambda in grid {
            let ro = match readout::fit(&fit_x, &fit_y, lambda) {
                Ok(ro) => ro,
                Err(Error::Singular(_)) => continue,
                Err(e) => return Err(e).stage("readout"),
            };
            let score = readout::nmse_matrix(&ro.predict(&val_x)?, &val_y).stage("metrics")?;
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((lambda, score));
            }
        }
        let (lambda, _) = best.ok_or_else(|| Error::Singular("every lambda in the grid failed".into()))?;
        self.evaluate(lambda)
    }
}

pub(crate) fn design_matrix(
    trajectory: &StateTrajectory,
    input: &TimeSeries,
    include_input: bool,
) -> Result<DMatrix<f64>> {
    if include_input {
        harvest_with_input(trajectory, input, 0)
    } else {
        harvest(trajectory, 0)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    Prepared::new(config)?.evaluate(config.lambda)
}

/// Drives a (re)built backend over a normalised input and applies a fitted
/// readout at every step; outputs are in normalised target units.
pub fn predict_normalized<R: Reservoir>(
    reservoir: &R,
    readout: &Readout,
    normalized_input: &TimeSeries,
    include_input: bool,
) -> Result<DMatrix<f64>> {
    let trajectory = drive(reservoir, normalized_input, None)?;
    let design = design_matrix(&trajectory, normalized_input, include_input)?;
    readout.predict(&design)
}
