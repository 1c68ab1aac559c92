//! Trained linear readout: ridge regression on harvested reservoir states.
//!
//! The design matrix carries a trailing constant column; its weight is the
//! bias and is not penalised.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::reservoir::TimeSeries;

pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Smallest Cholesky pivot, relative to the largest Gram diagonal, accepted
/// for an unregularised fit.
const RANK_TOLERANCE: f64 = 1e-14;

/// Affine map `y = W x`, with `x` ending in the constant 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    weights: DMatrix<f64>,
    lambda: f64,
}

impl Readout {
    pub fn from_weights(weights: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::dim("readout weights must be non-empty"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("readout weights must be finite"));
        }
        Ok(Readout { weights, lambda })
    }

    /// `outputs x (K + 1)`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn apply(&self, augmented: &[f64]) -> Result<Vec<f64>> {
        if augmented.len() != self.input_width() {
            return Err(Error::dim(format!(
                "readout expects {} inputs, got {}",
                self.input_width(),
                augmented.len()
            )));
        }
        let w = &self.weights;
        Ok((0..w.nrows())
            .map(|o| (0..w.ncols()).fold(0.0, |acc, c| acc + augmented[c] * w[(o, c)]))
            .collect())
    }

    /// Row-wise application to a design matrix, `R x outputs`.
    pub fn predict(&self, design: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if design.ncols() != self.input_width() {
            return Err(Error::dim(format!(
                "design has {} columns, readout expects {}",
                design.ncols(),
                self.input_width()
            )));
        }
        // Fixed per-row summation order: a row's output never depends on
        // which other rows share the call.
        let w = &self.weights;
        Ok(DMatrix::from_fn(design.nrows(), w.nrows(), |r, o| {
            (0..w.ncols()).fold(0.0, |acc, c| acc + design[(r, c)] * w[(o, c)])
        }))
    }
}

/// Minimises `|D W^T - Y|_F^2 + lambda |W_nobias|_F^2` through the
/// regularised normal equations and a Cholesky solve.
pub fn fit(design: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<Readout> {
    let (rows, width) = design.shape();
    if rows == 0 || width == 0 {
        return Err(Error::dim("empty design matrix"));
    }
    if targets.nrows() != rows || targets.ncols() == 0 {
        return Err(Error::dim(format!(
            "targets have {} rows, design has {rows}",
            targets.nrows()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("regularisation must be a nonnegative finite number"));
    }
    if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::param("design and targets must be finite"));
    }

    let mut gram = design.tr_mul(design);
    for i in 0..width - 1 {
        gram[(i, i)] += lambda;
    }
    let rhs = design.tr_mul(targets);
    let scale = gram.diagonal().iter().copied().fold(0.0, f64::max);

    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| singular(lambda))?;
    if lambda == 0.0 {
        let min_pivot = chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|p| p * p)
            .fold(f64::INFINITY, f64::min);
        if !(min_pivot > RANK_TOLERANCE * scale) {
            return Err(singular(lambda));
        }
    }
    let solution = chol.solve(&rhs);
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(singular(lambda));
    }
    Readout::from_weights(solution.transpose(), lambda)
}

fn singular(lambda: f64) -> Error {
    if lambda == 0.0 {
        Error::Singular("design is rank-deficient; use a regularisation lambda > 0".into())
    } else {
        Error::Singular(format!("normal equations not positive definite at lambda {lambda}"))
    }
}

fn check_shapes(predicted: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<()> {
    if predicted.shape() != target.shape() || target.nrows() == 0 {
        return Err(Error::dim(format!(
            "prediction {:?} and target {:?} shapes differ",
            predicted.shape(),
            target.shape()
        )));
    }
    Ok(())
}

fn channel_mse_and_variance(predicted: &DMatrix<f64>, target: &DMatrix<f64>, c: usize) -> (f64, f64) {
    let n = target.nrows() as f64;
    let col = target.column(c);
    let mean = col.sum() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mse = col
        .iter()
        .zip(predicted.column(c).iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / n;
    (mse, var)
}

/// Per-channel `MSE / Var(target)` (population variance), averaged over channels.
pub fn nmse_matrix(predicted: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<f64> {
    check_shapes(predicted, target)?;
    let mut total = 0.0;
    for c in 0..target.ncols() {
        let (mse, var) = channel_mse_and_variance(predicted, target, c);
        if !(var > 0.0) {
            return Err(Error::param(format!("target channel {c} has zero variance")));
        }
        total += mse / var;
    }
    Ok(total / target.ncols() as f64)
}

pub fn nmse(predicted: &TimeSeries, target: &TimeSeries) -> Result<f64> {
    nmse_matrix(predicted.data(), target.data())
}

/// Coefficient of determination `1 - NMSE`; negative out of sample when the
/// fit is worse than the mean.
pub fn r_squared(predicted: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<f64> {
    Ok(1.0 - nmse_matrix(predicted, target)?)
}
