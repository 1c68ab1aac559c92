//! Benchmark tasks producing aligned `(input, target)` series.
//!
//! Pre-history is zero-padded everywhere. Each generated pair records the
//! affine min/max maps that send the realised input and target into `[0, 1]`.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::TimeSeries;
use crate::SeededRng;

const NARMA_ORDER: usize = 10;
const NARMA_BOUND: f64 = 10.0;
const NARMA_MAX_REGENERATIONS: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Narma10,
    DelayMemory,
    SinePrediction,
    MackeyGlass,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Narma10 => "narma10",
            TaskKind::DelayMemory => "delay-memory",
            TaskKind::SinePrediction => "sine-prediction",
            TaskKind::MackeyGlass => "mackey-glass",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub length: usize,
    /// Prediction horizon for sine and Mackey-Glass.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Recall delay for the delay-memory task.
    #[serde(default)]
    pub delay: usize,
    /// Sine period in steps.
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> usize {
    1
}

fn default_period() -> f64 {
    50.0
}

impl TaskSpec {
    pub fn new(kind: TaskKind, length: usize, seed: u64) -> Self {
        TaskSpec {
            kind,
            length,
            horizon: default_horizon(),
            delay: 0,
            period: default_period(),
            seed,
        }
    }

    pub fn generate(&self) -> Result<TaskData> {
        match self.kind {
            TaskKind::Narma10 => narma10(self.length, self.seed),
            TaskKind::DelayMemory => delay_memory(self.length, self.delay, self.seed),
            TaskKind::SinePrediction => sine_prediction(self.length, self.horizon, self.period),
            TaskKind::MackeyGlass => mackey_glass(self.length, self.horizon),
        }
    }
}

/// `normalised = (x - offset) / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        offset: 0.0,
        scale: 1.0,
    };

    /// Min/max map of the realised series onto `[0, 1]`; a constant series
    /// maps to 0.
    pub fn fit(series: &TimeSeries) -> Self {
        let data = series.data();
        let min = data.min();
        let max = data.max();
        let range = max - min;
        if range > f64::MIN_POSITIVE {
            Normalization {
                offset: min,
                scale: range,
            }
        } else {
            Normalization {
                offset: min,
                scale: 1.0,
            }
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.offset) / self.scale).clamp(f64::MIN, f64::MAX)
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }

    pub fn apply_series(&self, series: &TimeSeries) -> Result<TimeSeries> {
        series.map(|v| self.apply(v))
    }

    pub fn invert_series(&self, series: &TimeSeries) -> Result<TimeSeries> {
        series.map(|v| self.invert(v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub input: TimeSeries,
    pub target: TimeSeries,
    pub input_normalization: Normalization,
    pub target_normalization: Normalization,
    /// Times the generator had to redraw (NARMA divergence guard).
    pub regenerations: u64,
}

impl TaskData {
    fn new(input: Vec<f64>, target: Vec<f64>, regenerations: u64) -> Result<Self> {
        let input = TimeSeries::from_scalar(&input)?;
        let target = TimeSeries::from_scalar(&target)?;
        Ok(TaskData {
            input_normalization: Normalization::fit(&input),
            target_normalization: Normalization::fit(&target),
            input,
            target,
            regenerations,
        })
    }

    pub fn normalized_input(&self) -> Result<TimeSeries> {
        self.input_normalization.apply_series(&self.input)
    }
}

fn uniform_series(len: usize, high: f64, seed: u64) -> Vec<f64> {
    let mut rng = SeededRng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(0.0..=high)).collect()
}

/// NARMA-10 recurrence over `input`; entry `t` is `y_{t+1}`, which depends
/// on inputs up to `t`. `None` if the series leaves the divergence bound.
pub fn narma10_response(input: &[f64]) -> Option<Vec<f64>> {
    let mut y = vec![0.0; input.len() + 1];
    for t in 0..input.len() {
        let window: f64 = (0..NARMA_ORDER).filter(|&i| i <= t).map(|i| y[t - i]).sum();
        let lagged = if t >= NARMA_ORDER - 1 {
            input[t + 1 - NARMA_ORDER]
        } else {
            0.0
        };
        let next = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * lagged * input[t] + 0.1;
        if !(next.abs() <= NARMA_BOUND) {
            return None;
        }
        y[t + 1] = next;
    }
    y.remove(0);
    Some(y)
}

pub fn narma10(length: usize, seed: u64) -> Result<TaskData> {
    if length <= NARMA_ORDER {
        return Err(Error::param(format!("narma10 needs length > {NARMA_ORDER}")));
    }
    for attempt in 0..NARMA_MAX_REGENERATIONS {
        let input = uniform_series(length, 0.5, seed.wrapping_add(attempt));
        if let Some(target) = narma10_response(&input) {
            return TaskData::new(input, target, attempt);
        }
    }
    Err(Error::Generation(format!(
        "narma10 diverged in {NARMA_MAX_REGENERATIONS} draws"
    )))
}

/// `target_t = input_{t-d}`, zero-padded.
pub fn delayed(input: &[f64], delay: usize) -> Vec<f64> {
    (0..input.len())
        .map(|t| if t >= delay { input[t - delay] } else { 0.0 })
        .collect()
}

pub fn delay_memory(length: usize, delay: usize, seed: u64) -> Result<TaskData> {
    if length <= delay {
        return Err(Error::param("delay-memory needs length > delay"));
    }
    let input = uniform_series(length, 1.0, seed);
    let target = delayed(&input, delay);
    TaskData::new(input, target, 0)
}

/// `memory capacity = sum_d r^2(d)`.
pub fn memory_capacity(r_squared: &[f64]) -> f64 {
    r_squared.iter().sum()
}

pub fn sine_prediction(length: usize, horizon: usize, period: f64) -> Result<TaskData> {
    if length <= horizon {
        return Err(Error::param("sine-prediction needs length > horizon"));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::param("sine period must be positive"));
    }
    let w = 2.0 * std::f64::consts::PI / period;
    let input = (0..length).map(|t| (w * t as f64).sin()).collect();
    let target = (0..length).map(|t| (w * (t + horizon) as f64).sin()).collect();
    TaskData::new(input, target, 0)
}

pub const MG_BETA: f64 = 0.2;
pub const MG_GAMMA: f64 = 0.1;
pub const MG_EXPONENT: i32 = 10;
pub const MG_DELAY: f64 = 17.0;
pub const MG_INITIAL: f64 = 1.2;
pub const MG_TRANSIENT: f64 = 1000.0;

#[inline]
fn mg_rhs(x: f64, lagged: f64) -> f64 {
    MG_BETA * lagged / (1.0 + lagged.powi(MG_EXPONENT)) - MG_GAMMA * x
}

/// Fixed-step RK4 for the Mackey-Glass delay equation. Off-grid delayed
/// values come from cubic Hermite interpolation of the stored solution and
/// its derivative.
#[derive(Clone, Debug)]
pub struct MackeyGlass {
    dt: f64,
    lag: usize,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MackeyGlass {
    /// Constant history `x = 1.2` on `[-17, 0]`.
    pub fn new(dt: f64) -> Result<Self> {
        let lag = Self::lag_steps(dt)?;
        let mut values = vec![MG_INITIAL; lag + 1];
        let mut slopes = vec![0.0; lag + 1];
        values[lag] = MG_INITIAL;
        slopes[lag] = mg_rhs(MG_INITIAL, MG_INITIAL);
        Ok(MackeyGlass {
            dt,
            lag,
            values,
            slopes,
        })
    }

    /// Restarts from a history window of `17 / dt + 1` grid points.
    pub fn from_history(dt: f64, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let lag = Self::lag_steps(dt)?;
        if values.len() != lag + 1 || slopes.len() != lag + 1 {
            return Err(Error::dim(format!("history needs {} points", lag + 1)));
        }
        Ok(MackeyGlass {
            dt,
            lag,
            values,
            slopes,
        })
    }

    fn lag_steps(dt: f64) -> Result<usize> {
        let steps = MG_DELAY / dt;
        if !(dt > 0.0) || (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::param("dt must divide the delay 17 exactly"));
        }
        Ok(steps.round() as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn current(&self) -> f64 {
        *self.values.last().expect("non-empty history")
    }

    /// Last `17 / dt + 1` points and slopes.
    pub fn history(&self) -> (Vec<f64>, Vec<f64>) {
        let start = self.values.len() - self.lag - 1;
        (self.values[start..].to_vec(), self.slopes[start..].to_vec())
    }

    /// History window resampled on a grid of half the spacing.
    pub fn refined_history(&self) -> (Vec<f64>, Vec<f64>) {
        let (xs, ds) = self.history();
        let h = self.dt;
        let mut values = Vec::with_capacity(2 * xs.len() - 1);
        let mut slopes = Vec::with_capacity(2 * xs.len() - 1);
        for i in 0..xs.len() {
            if i > 0 {
                let (xa, xb, da, db) = (xs[i - 1], xs[i], ds[i - 1], ds[i]);
                values.push(0.5 * (xa + xb) + 0.125 * h * (da - db));
                slopes.push(1.5 * (xb - xa) / h - 0.25 * (da + db));
            }
            values.push(xs[i]);
            slopes.push(ds[i]);
        }
        (values, slopes)
    }

    fn lagged_midpoint(&self, n: usize) -> f64 {
        let a = n - self.lag;
        let (xa, xb) = (self.values[a], self.values[a + 1]);
        let (da, db) = (self.slopes[a], self.slopes[a + 1]);
        0.5 * (xa + xb) + 0.125 * self.dt * (da - db)
    }

    pub fn step(&mut self) {
        let n = self.values.len() - 1;
        let h = self.dt;
        let x = self.values[n];
        let lag0 = self.values[n - self.lag];
        let lag_half = self.lagged_midpoint(n);
        let lag1 = self.values[n + 1 - self.lag];
        let k1 = mg_rhs(x, lag0);
        let k2 = mg_rhs(x + 0.5 * h * k1, lag_half);
        let k3 = mg_rhs(x + 0.5 * h * k2, lag_half);
        let k4 = mg_rhs(x + h * k3, lag1);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        self.values.push(next);
        self.slopes.push(mg_rhs(next, lag1));
    }

    /// Advances `units` unit time intervals and returns the value after each.
    pub fn advance(&mut self, units: usize) -> Vec<f64> {
        let per_unit = (1.0 / self.dt).round() as usize;
        (0..units)
            .map(|_| {
                for _ in 0..per_unit {
                    self.step();
                }
                self.current()
            })
            .collect()
    }
}

/// Mackey-Glass samples at unit spacing after the discarded transient;
/// target is the series `horizon` steps ahead.
pub fn mackey_glass(length: usize, horizon: usize) -> Result<TaskData> {
    if length == 0 {
        return Err(Error::param("mackey-glass needs length >= 1"));
    }
    let mut mg = MackeyGlass::new(1.0)?;
    mg.advance(MG_TRANSIENT as usize);
    let xs = mg.advance(length + horizon);
    let input = xs[..length].to_vec();
    let target = xs[horizon..horizon + length].to_vec();
    TaskData::new(input, target, 0)
}
