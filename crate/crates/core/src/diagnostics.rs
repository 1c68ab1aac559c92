//! Measurable reservoir-quality criteria: echo state property, separation,
//! reproducibility and the fading-memory profile.
//!
//! Scores are comparative; none carries a universal pass/fail threshold.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::par::ExecutionMode;
use crate::readout;
use crate::reservoir::{drive, harvest, Reservoir, ReservoirKind, StateTrajectory, TimeSeries};
use crate::tasks::{delayed, memory_capacity};
use crate::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct EchoStateOutcome {
    /// First step (1-based) at which every pair of trials lies within epsilon.
    pub convergence_step: Option<usize>,
    pub final_distance: f64,
    /// Maximum pairwise distance after each step.
    pub distances: Vec<f64>,
}

/// Drives `trials` random initial states with the same input and tracks the
/// largest pairwise distance between the full backend states.
pub fn echo_state_test<R: Reservoir>(
    reservoir: &R,
    input: &TimeSeries,
    trials: usize,
    epsilon: f64,
    seed: u64,
    mode: ExecutionMode,
) -> Result<EchoStateOutcome> {
    if trials < 2 {
        return Err(Error::param("echo-state test needs at least two trials"));
    }
    reservoir.check_input(input)?;
    let mut rng = SeededRng::seed_from_u64(seed);
    let starts: Vec<R::State> = (0..trials).map(|_| reservoir.random_state(&mut rng)).collect();
    let paths = mode.try_map(starts, |start| {
        let mut state = start;
        let mut path = Vec::with_capacity(input.len());
        for t in 0..input.len() {
            state = reservoir.advance(&state, &input.sample(t))?.0;
            path.push(state.clone());
        }
        Ok::<_, Error>(path)
    })?;
    let distances: Vec<f64> = (0..input.len())
        .map(|t| {
            let mut worst = 0.0f64;
            for a in 0..trials {
                for b in (a + 1)..trials {
                    worst = worst.max(reservoir.state_distance(&paths[a][t], &paths[b][t]));
                }
            }
            worst
        })
        .collect();
    let convergence_step = distances.iter().position(|&d| d < epsilon).map(|i| i + 1);
    Ok(EchoStateOutcome {
        convergence_step,
        final_distance: *distances.last().expect("non-empty input"),
        distances,
    })
}

fn row_norm(m: &DMatrix<f64>, r: usize) -> f64 {
    m.row(r).norm()
}

/// Mean post-washout distance between two driven trajectories over their
/// mean state norm.
pub fn separation_test<R: Reservoir>(
    reservoir: &R,
    base: &TimeSeries,
    perturbed: &TimeSeries,
    washout: usize,
) -> Result<f64> {
    if base.len() != perturbed.len() {
        return Err(Error::dim("separation inputs must have equal length"));
    }
    let a = drive(reservoir, base, None)?.with_washout(washout)?;
    let b = drive(reservoir, perturbed, None)?.with_washout(washout)?;
    let (sa, sb) = (a.states(), b.states());
    let rows = washout..a.len();
    let n = rows.len() as f64;
    let dist: f64 = rows.clone().map(|r| (sa.row(r) - sb.row(r)).norm()).sum::<f64>() / n;
    let norm: f64 = rows.map(|r| 0.5 * (row_norm(sa, r) + row_norm(sb, r))).sum::<f64>() / n;
    Ok(if norm > 0.0 { dist / norm } else { 0.0 })
}

fn mean_distance(a: &StateTrajectory, b: &StateTrajectory) -> f64 {
    let n = a.len();
    (0..n)
        .map(|r| (a.states().row(r) - b.states().row(r)).norm())
        .sum::<f64>()
        / n as f64
}

/// Mean distance between the clean trajectory and trajectories driven by
/// `input + U[-delta, delta]` noise, divided by `delta`. Lower is better.
pub fn reproducibility_test<R: Reservoir>(
    reservoir: &R,
    input: &TimeSeries,
    delta: f64,
    trials: usize,
    seed: u64,
    mode: ExecutionMode,
) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::param("noise amplitude must be nonnegative"));
    }
    if delta == 0.0 || trials == 0 {
        return Ok(0.0);
    }
    let clean = drive(reservoir, input, None)?;
    let bounded = reservoir.descriptor().kind == ReservoirKind::Quantum;
    let mut rng = SeededRng::seed_from_u64(seed);
    let noisy: Vec<TimeSeries> = (0..trials)
        .map(|_| {
            input.map(|v| {
                let w = v + rng.random_range(-delta..=delta);
                if bounded {
                    w.clamp(0.0, 1.0)
                } else {
                    w
                }
            })
        })
        .collect::<Result<_>>()?;
    let scores = mode.try_map(noisy, |series| {
        drive(reservoir, &series, None).map(|t| mean_distance(&clean, &t))
    })?;
    Ok(scores.iter().sum::<f64>() / trials as f64 / delta)
}

/// Test r^2 of delayed-input recall for each delay `1..=max_delay`, clamped
/// to `[0, 1]`. One drive serves every delay.
pub fn fading_memory_profile<R: Reservoir>(
    reservoir: &R,
    max_delay: usize,
    length: usize,
    seed: u64,
    lambda: f64,
    mode: ExecutionMode,
) -> Result<Vec<f64>> {
    if max_delay == 0 {
        return Err(Error::param("max delay must be at least 1"));
    }
    let mut rng = SeededRng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..length).map(|_| rng.random_range(0.0..=1.0)).collect();
    let input = TimeSeries::from_scalar(&raw)?;
    let columns = reservoir.input_dimension();
    let input = if columns == 1 {
        input
    } else {
        return Err(Error::dim("fading-memory profile needs a one-channel reservoir"));
    };
    let washout = max_delay.max(length / 10);
    let train_end = washout + (length - washout) * 7 / 10;
    if washout >= length || train_end + 2 > length || train_end <= washout {
        return Err(Error::param(format!(
            "length {length} too short for max delay {max_delay}"
        )));
    }
    let design = harvest(&drive(reservoir, &input, None).stage("drive")?, 0)?;
    let train_x = design.rows(washout, train_end - washout).into_owned();
    let test_x = design.rows(train_end, length - train_end).into_owned();
    mode.try_map((1..=max_delay).collect(), |d| {
        let target = delayed(&raw, d);
        let column = |s: usize, e: usize| DMatrix::from_column_slice(e - s, 1, &target[s..e]);
        let ro = readout::fit(&train_x, &column(washout, train_end), lambda).stage("readout")?;
        let r2 = readout::r_squared(&ro.predict(&test_x)?, &column(train_end, length))?;
        Ok(r2.clamp(0.0, 1.0))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Steps in the driving sequences.
    pub length: usize,
    pub washout: usize,
    pub esp_trials: usize,
    pub esp_epsilon: f64,
    pub noise: f64,
    pub repro_trials: usize,
    pub max_delay: usize,
    pub memory_length: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            length: 500,
            washout: 50,
            esp_trials: 4,
            esp_epsilon: 1e-6,
            noise: 1e-3,
            repro_trials: 4,
            max_delay: 40,
            memory_length: 3000,
            lambda: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub esp_convergence_step: Option<usize>,
    pub esp_final_distance: f64,
    pub memory_profile: Vec<f64>,
    pub memory_capacity: f64,
    pub separation_score: f64,
    pub reproducibility_score: f64,
}

/// Full suite on uniform `[0, 1]` inputs drawn from `config.seed`.
pub fn run_diagnostics<R: Reservoir>(
    reservoir: &R,
    config: &DiagnosticsConfig,
    mode: ExecutionMode,
) -> Result<DiagnosticsReport> {
    let uniform = |seed: u64| {
        let mut rng = SeededRng::seed_from_u64(seed);
        let v: Vec<f64> = (0..config.length).map(|_| rng.random_range(0.0..=1.0)).collect();
        TimeSeries::from_scalar(&v)
    };
    let base = uniform(config.seed)?;
    let other = uniform(config.seed.wrapping_add(1))?;
    let esp = echo_state_test(
        reservoir,
        &base,
        config.esp_trials,
        config.esp_epsilon,
        config.seed.wrapping_add(2),
        mode,
    )
    .stage("echo-state")?;
    let separation = separation_test(reservoir, &base, &other, config.washout).stage("separation")?;
    let reproducibility = reproducibility_test(
        reservoir,
        &base,
        config.noise,
        config.repro_trials,
        config.seed.wrapping_add(3),
        mode,
    )
    .stage("reproducibility")?;
    let profile = fading_memory_profile(
        reservoir,
        config.max_delay,
        config.memory_length,
        config.seed.wrapping_add(4),
        config.lambda,
        mode,
    )
    .stage("memory")?;
    Ok(DiagnosticsReport {
        esp_convergence_step: esp.convergence_step,
        esp_final_distance: esp.final_distance,
        memory_capacity: memory_capacity(&profile),
        memory_profile: profile,
        separation_score: separation,
        reproducibility_score: reproducibility,
    })
}
