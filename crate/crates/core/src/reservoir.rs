//! Reservoir-agnostic data model: time series, the driven-reservoir contract,
//! state trajectories and the design matrix handed to the readout.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::SeededRng;

/// Ordered real-valued samples, `T` steps by `d` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    data: DMatrix<f64>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(data: DMatrix<f64>, dt: f64) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::dim(format!(
                "time series needs at least one step and one channel, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        check_finite(&data)?;
        Ok(TimeSeries { data, dt })
    }

    /// Single-channel series with unit step spacing.
    pub fn from_scalar(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values), 1.0)
    }

    /// Series from per-step sample rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let channels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != channels) {
            return Err(Error::dim("all channels must have identical length"));
        }
        Self::new(DMatrix::from_fn(rows.len(), channels, |t, c| rows[t][c]), 1.0)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample(&self, step: usize) -> Vec<f64> {
        self.data.row(step).iter().copied().collect()
    }

    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.data.column(channel).iter().copied().collect()
    }

    /// Contiguous steps `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::dim(format!(
                "slice {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        Self::new(self.data.rows(start, end - start).into_owned(), self.dt)
    }

    /// Concatenation in time.
    pub fn concat(&self, other: &TimeSeries) -> Result<Self> {
        if self.channels() != other.channels() {
            return Err(Error::dim("channel counts differ"));
        }
        let (a, b) = (self.len(), other.len());
        let data = DMatrix::from_fn(a + b, self.channels(), |t, c| {
            if t < a {
                self.data[(t, c)]
            } else {
                other.data[(t - a, c)]
            }
        });
        Self::new(data, self.dt)
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.data.map(f), self.dt)
    }
}

fn check_finite(data: &DMatrix<f64>) -> Result<()> {
    for t in 0..data.nrows() {
        for c in 0..data.ncols() {
            if !data[(t, c)].is_finite() {
                return Err(Error::NonFinite { step: t, channel: c });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReservoirKind {
    ClassicalEsn,
    Quantum,
}

impl ReservoirKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReservoirKind::ClassicalEsn => "esn",
            ReservoirKind::Quantum => "qrc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReservoirDescriptor {
    pub kind: ReservoirKind,
    pub readout_dimension: usize,
    pub state_dimension: usize,
}

/// A fixed driven dynamical system `X(t_i) = f(X(t_{i-1}), u(t_i))`.
///
/// Implementations are immutable; every step takes and returns explicit
/// state so independent drives can run concurrently.
pub trait Reservoir: Sync {
    type State: Clone + Send + Sync;

    fn descriptor(&self) -> ReservoirDescriptor;

    fn input_dimension(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    /// One application of the update map; returns the next state and its
    /// observed signals (length `readout_dimension`).
    fn advance(&self, state: &Self::State, input: &[f64]) -> Result<(Self::State, Vec<f64>)>;

    /// A random admissible initial state, used by the echo-state test.
    fn random_state(&self, rng: &mut SeededRng) -> Self::State;

    /// Distance between two full backend states.
    fn state_distance(&self, a: &Self::State, b: &Self::State) -> f64;

    /// Backend-specific admissibility of an input series.
    fn check_input(&self, input: &TimeSeries) -> Result<()> {
        if input.channels() != self.input_dimension() {
            return Err(Error::dim(format!(
                "input has {} channels, reservoir expects {}",
                input.channels(),
                self.input_dimension()
            )));
        }
        Ok(())
    }
}

/// Observed states, one row per input step.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTrajectory {
    states: DMatrix<f64>,
    washout: usize,
}

impl StateTrajectory {
    pub fn new(states: DMatrix<f64>, washout: usize) -> Result<Self> {
        if washout >= states.nrows() {
            return Err(Error::param(format!(
                "washout {washout} must be below trajectory length {}",
                states.nrows()
            )));
        }
        check_finite(&states)?;
        Ok(StateTrajectory { states, washout })
    }

    pub fn with_washout(mut self, washout: usize) -> Result<Self> {
        if washout >= self.states.nrows() {
            return Err(Error::param(format!(
                "washout {washout} must be below trajectory length {}",
                self.states.nrows()
            )));
        }
        self.washout = washout;
        Ok(self)
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn washout(&self) -> usize {
        self.washout
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.states.ncols()
    }

    pub fn row(&self, step: usize) -> Vec<f64> {
        self.states.row(step).iter().copied().collect()
    }

    /// Rows `start..end` as a new trajectory with zero washout.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::dim(format!("slice {start}..{end} out of range")));
        }
        Self::new(self.states.rows(start, end - start).into_owned(), 0)
    }
}

/// Drives `reservoir` from `initial` (or its default state) over `input`.
pub fn drive<R: Reservoir>(reservoir: &R, input: &TimeSeries, initial: Option<&R::State>) -> Result<StateTrajectory> {
    drive_with_state(reservoir, input, initial).map(|(traj, _)| traj)
}

/// Like [`drive`], also returning the backend state after the last step.
pub fn drive_with_state<R: Reservoir>(
    reservoir: &R,
    input: &TimeSeries,
    initial: Option<&R::State>,
) -> Result<(StateTrajectory, R::State)> {
    reservoir.check_input(input)?;
    let k = reservoir.descriptor().readout_dimension;
    let mut state = match initial {
        Some(s) => s.clone(),
        None => reservoir.initial_state(),
    };
    let mut states = DMatrix::zeros(input.len(), k);
    let mut u = vec![0.0; input.channels()];
    for t in 0..input.len() {
        for (c, slot) in u.iter_mut().enumerate() {
            let v = input.data()[(t, c)];
            if !v.is_finite() {
                return Err(Error::NonFinite { step: t, channel: c });
            }
            *slot = v;
        }
        let (next, observed) = reservoir.advance(&state, &u)?;
        if observed.len() != k {
            return Err(Error::dim(format!(
                "backend returned {} signals, declared readout dimension {k}",
                observed.len()
            )));
        }
        for (j, v) in observed.into_iter().enumerate() {
            states[(t, j)] = v;
        }
        state = next;
    }
    Ok((StateTrajectory::new(states, 0)?, state))
}

/// Post-washout states with a trailing constant-1 bias column.
pub fn harvest(trajectory: &StateTrajectory, washout: usize) -> Result<DMatrix<f64>> {
    harvest_columns(trajectory, None, washout)
}

/// Post-washout `[states | input | 1]`, for readouts that see the raw input too.
pub fn harvest_with_input(trajectory: &StateTrajectory, input: &TimeSeries, washout: usize) -> Result<DMatrix<f64>> {
    if input.len() != trajectory.len() {
        return Err(Error::dim("input and trajectory lengths differ"));
    }
    harvest_columns(trajectory, Some(input), washout)
}

fn harvest_columns(trajectory: &StateTrajectory, input: Option<&TimeSeries>, washout: usize) -> Result<DMatrix<f64>> {
    let t = trajectory.len();
    if washout >= t {
        return Err(Error::param(format!(
            "washout {washout} must be below trajectory length {t}"
        )));
    }
    let k = trajectory.dimension();
    let n = input.map_or(0, TimeSeries::channels);
    let rows = t - washout;
    Ok(DMatrix::from_fn(rows, k + n + 1, |r, c| {
        let step = r + washout;
        if c < k {
            trajectory.states[(step, c)]
        } else if c < k + n {
            input.map_or(0.0, |i| i.data()[(step, c - k)])
        } else {
            1.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_series_rejects_non_finite_with_step() {
        let err = TimeSeries::from_scalar(&[0.0, 1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, Error::NonFinite { step: 2, channel: 0 });
        assert!(TimeSeries::new(DMatrix::zeros(0, 1), 1.0).is_err());
    }

    #[test]
    fn harvest_counts_rows_and_appends_bias() {
        let states = DMatrix::from_fn(10, 3, |t, c| (t * 3 + c) as f64 - 7.5);
        let traj = StateTrajectory::new(states.clone(), 0).unwrap();
        let design = harvest(&traj, 3).unwrap();
        assert_eq!(design.shape(), (7, 4));
        assert!(design.column(3).iter().all(|&v| v == 1.0));
        for r in 0..7 {
            for c in 0..3 {
                assert_eq!(design[(r, c)], states[(r + 3, c)]);
            }
        }
        assert_eq!(harvest(&traj, 0).unwrap().nrows(), 10);
        assert!(harvest(&traj, 10).is_err());
    }

    #[test]
    fn harvest_with_input_places_input_before_bias() {
        let traj = StateTrajectory::new(DMatrix::from_element(4, 2, 0.5), 0).unwrap();
        let input = TimeSeries::from_scalar(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let design = harvest_with_input(&traj, &input, 1).unwrap();
        assert_eq!(design.shape(), (3, 4));
        assert_eq!(design[(0, 2)], 2.0);
        assert_eq!(design[(2, 3)], 1.0);
    }

    #[test]
    fn trajectory_washout_bounds() {
        assert!(StateTrajectory::new(DMatrix::zeros(3, 2), 3).is_err());
        let t = StateTrajectory::new(DMatrix::zeros(3, 2), 2).unwrap();
        assert!(t.with_washout(5).is_err());
    }
}
