//! Classical echo state network backend.
//!
//! The recurrent network is drawn at random from a seed, rescaled to a target
//! spectral radius and never trained. Its update is the leaky-integrator map
//! `x' = (1 - a) x + a g(W x + W_in u + b)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{Reservoir, ReservoirDescriptor, ReservoirKind};
use crate::SeededRng;

const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERATIONS: usize = 100_000;
const MAX_DRAW_ATTEMPTS: u64 = 8;
const POWER_BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Identity,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => v.tanh(),
            Nonlinearity::Identity => v,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Identity => "identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnConfig {
    pub nodes: usize,
    #[serde(default = "one_usize")]
    pub input_dim: usize,
    pub spectral_radius: f64,
    #[serde(default = "one_f64")]
    pub input_scaling: f64,
    #[serde(default = "one_f64")]
    pub connectivity: f64,
    #[serde(default = "one_f64")]
    pub leak_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl EsnConfig {
    pub fn new(nodes: usize, spectral_radius: f64, seed: u64) -> Self {
        EsnConfig {
            nodes,
            input_dim: 1,
            spectral_radius,
            input_scaling: 1.0,
            connectivity: 1.0,
            leak_rate: 1.0,
            seed,
            nonlinearity: Nonlinearity::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::param("esn.nodes must be at least 1"));
        }
        if self.input_dim == 0 {
            return Err(Error::param("esn.input_dim must be at least 1"));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return Err(Error::param("esn.spectral_radius must be positive"));
        }
        if !(self.input_scaling > 0.0 && self.input_scaling.is_finite()) {
            return Err(Error::param("esn.input_scaling must be positive"));
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return Err(Error::param("esn.connectivity must lie in (0, 1]"));
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return Err(Error::param("esn.leak_rate must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EsnReservoir {
    weights: DMatrix<f64>,
    input_weights: DMatrix<f64>,
    bias: DVector<f64>,
    leak_rate: f64,
    nonlinearity: Nonlinearity,
}

impl EsnReservoir {
    /// Draws a reservoir from `config`; fully determined by `config.seed`.
    pub fn generate(config: &EsnConfig) -> Result<Self> {
        config.validate()?;
        let k = config.nodes;
        for attempt in 0..MAX_DRAW_ATTEMPTS {
            let mut rng = SeededRng::seed_from_u64(config.seed);
            rng.set_stream(attempt);
            let mut weights = DMatrix::from_fn(k, k, |_, _| {
                if config.connectivity >= 1.0 || rng.random::<f64>() < config.connectivity {
                    rng.random_range(-1.0..=1.0)
                } else {
                    0.0
                }
            });
            let raw = spectral_radius(&weights);
            if !(raw > 0.0) {
                continue;
            }
            weights *= config.spectral_radius / raw;
            let s = config.input_scaling;
            let input_weights = DMatrix::from_fn(k, config.input_dim, |_, _| rng.random_range(-s..=s));
            let bias = DVector::from_fn(k, |_, _| rng.random_range(-0.1 * s..=0.1 * s));
            return Ok(EsnReservoir {
                weights,
                input_weights,
                bias,
                leak_rate: config.leak_rate,
                nonlinearity: config.nonlinearity,
            });
        }
        Err(Error::Generation(format!(
            "recurrent matrix had zero spectral radius in {MAX_DRAW_ATTEMPTS} draws"
        )))
    }

    /// Reservoir with explicit weights.
    pub fn from_parts(
        weights: DMatrix<f64>,
        input_weights: DMatrix<f64>,
        bias: DVector<f64>,
        leak_rate: f64,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let k = weights.nrows();
        if k == 0 || weights.ncols() != k {
            return Err(Error::dim("recurrent matrix must be square and non-empty"));
        }
        if input_weights.nrows() != k || input_weights.ncols() == 0 || bias.len() != k {
            return Err(Error::dim("input weights or bias do not match node count"));
        }
        if !(leak_rate > 0.0 && leak_rate <= 1.0) {
            return Err(Error::param("leak rate must lie in (0, 1]"));
        }
        let all_finite = weights
            .iter()
            .chain(input_weights.iter())
            .chain(bias.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::param("weights must be finite"));
        }
        Ok(EsnReservoir {
            weights,
            input_weights,
            bias,
            leak_rate,
            nonlinearity,
        })
    }

    pub fn nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn input_weights(&self) -> &DMatrix<f64> {
        &self.input_weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn leak_rate(&self) -> f64 {
        self.leak_rate
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn step(&self, x: &DVector<f64>, u: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.nodes() || u.len() != self.input_weights.ncols() {
            return Err(Error::dim(format!(
                "step expects state {} and input {}, got {} and {}",
                self.nodes(),
                self.input_weights.ncols(),
                x.len(),
                u.len()
            )));
        }
        let mut pre = &self.weights * x + &self.bias;
        for (j, &uj) in u.iter().enumerate() {
            pre.axpy(uj, &self.input_weights.column(j), 1.0);
        }
        let a = self.leak_rate;
        let g = self.nonlinearity;
        Ok(DVector::from_fn(x.len(), |i, _| (1.0 - a) * x[i] + a * g.apply(pre[i])))
    }

    /// Every state variable is observable.
    pub fn observed_state(x: &DVector<f64>) -> Vec<f64> {
        x.iter().copied().collect()
    }
}

impl Reservoir for EsnReservoir {
    type State = DVector<f64>;

    fn descriptor(&self) -> ReservoirDescriptor {
        ReservoirDescriptor {
            kind: ReservoirKind::ClassicalEsn,
            readout_dimension: self.nodes(),
            state_dimension: self.nodes(),
        }
    }

    fn input_dimension(&self) -> usize {
        self.input_weights.ncols()
    }

    fn initial_state(&self) -> DVector<f64> {
        DVector::zeros(self.nodes())
    }

    fn advance(&self, state: &DVector<f64>, input: &[f64]) -> Result<(DVector<f64>, Vec<f64>)> {
        let next = self.step(state, input)?;
        let observed = Self::observed_state(&next);
        Ok((next, observed))
    }

    fn random_state(&self, rng: &mut SeededRng) -> DVector<f64> {
        DVector::from_fn(self.nodes(), |_, _| rng.random_range(-1.0..=1.0))
    }

    fn state_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm()
    }
}

/// Largest eigenvalue modulus by block power iteration.
///
/// A block of `min(n, 8)` vectors is multiplied by the matrix and
/// re-orthonormalised each sweep; the Ritz values of the projected block
/// resolve a dominant complex-conjugate pair, which single-vector power
/// iteration on a real non-symmetric matrix cannot.
pub fn spectral_radius(matrix: &DMatrix<f64>) -> f64 {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "spectral radius of a non-square matrix");
    if n == 0 || matrix.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let block = n.min(POWER_BLOCK);
    // Deterministic, generically non-degenerate start block.
    let start = DMatrix::from_fn(n, block, |i, j| {
        let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    let mut basis = start.qr().q();
    let mut previous = f64::NAN;
    let mut settled = 0;
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERATIONS {
        let image = matrix * &basis;
        let projected = basis.tr_mul(&image);
        if let Some(ritz) = max_eigenvalue_modulus(projected) {
            estimate = ritz;
        }
        if image.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        basis = image.qr().q();
        if (estimate - previous).abs() <= POWER_TOLERANCE * estimate {
            settled += 1;
            if settled >= 3 {
                break;
            }
        } else {
            settled = 0;
        }
        previous = estimate;
    }
    estimate
}

/// Eigenvalue moduli of a small dense matrix through a capped Schur iteration.
fn max_eigenvalue_modulus(m: DMatrix<f64>) -> Option<f64> {
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schur_radius(m: &DMatrix<f64>) -> f64 {
        let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 1_000_000).expect("schur converged");
        schur.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = EsnConfig {
            connectivity: 0.3,
            ..EsnConfig::new(40, 0.9, 7)
        };
        assert_eq!(
            EsnReservoir::generate(&cfg).unwrap(),
            EsnReservoir::generate(&cfg).unwrap()
        );
        let other = EsnReservoir::generate(&EsnConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(
            other.weights(),
            EsnReservoir::generate(&EsnConfig::new(40, 0.9, 7)).unwrap().weights()
        );
    }

    #[test]
    fn rescaled_spectral_radius_matches_schur_oracle() {
        for seed in 0..12 {
            for &(k, conn) in &[(10usize, 1.0), (50, 0.2), (100, 1.0), (200, 0.1)] {
                let cfg = EsnConfig {
                    connectivity: conn,
                    ..EsnConfig::new(k, 0.9, seed)
                };
                let res = EsnReservoir::generate(&cfg).unwrap();
                let measured = schur_radius(res.weights());
                assert!(
                    (measured - 0.9).abs() <= 1e-10 * 0.9,
                    "k={k} conn={conn} seed={seed}: radius {measured}"
                );
            }
        }
    }

    #[test]
    fn power_iteration_on_rotation_pair() {
        // Dominant complex pair 0.8 e^{±i 0.3} plus a real 0.5.
        let (c, s) = (0.8 * 0.3f64.cos(), 0.8 * 0.3f64.sin());
        let m = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 0.5]);
        assert!((spectral_radius(&m) - 0.8).abs() < 1e-12);
        assert_eq!(spectral_radius(&DMatrix::zeros(4, 4)), 0.0);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0, 0.5]));
        assert!((spectral_radius(&diag) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn full_connectivity_has_no_structural_zeros() {
        let res = EsnReservoir::generate(&EsnConfig::new(30, 0.9, 3)).unwrap();
        assert!(res.weights().iter().all(|&w| w != 0.0));
    }

    #[test]
    fn sparsity_tracks_connectivity() {
        let res = EsnReservoir::generate(&EsnConfig {
            connectivity: 0.1,
            ..EsnConfig::new(200, 0.9, 5)
        })
        .unwrap();
        let nz = res.weights().iter().filter(|&&w| w != 0.0).count() as f64 / 40_000.0;
        // binomial sd ~ 0.0015
        assert!((nz - 0.1).abs() < 0.01, "fraction {nz}");
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let res = EsnReservoir::from_parts(
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 2),
            DVector::zeros(3),
            1.0,
            Nonlinearity::Tanh,
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        assert_eq!(res.step(&x, &[0.4, -1.0]).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn identity_input_weights() {
        let res = EsnReservoir::from_parts(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1.0,
            Nonlinearity::Tanh,
        )
        .unwrap();
        let x = res.step(&DVector::from_vec(vec![0.5, 0.5]), &[1.0, 0.0]).unwrap();
        assert_eq!(x[0], 1f64.tanh());
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn leaky_two_node_hand_evaluation() {
        // W = [[0.5, -0.25], [0.1, 0.2]], W_in = [1, -1]^T, b = [0.05, 0], a = 0.5
        let res = EsnReservoir::from_parts(
            DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 0.1, 0.2]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![0.05, 0.0]),
            0.5,
            Nonlinearity::Tanh,
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.2, -0.4]);
        let next = res.step(&x, &[0.3]).unwrap();
        // pre = (0.1 + 0.1 + 0.3 + 0.05, 0.02 - 0.08 - 0.3) = (0.55, -0.36)
        let expected0 = 0.5 * 0.2 + 0.5 * 0.55f64.tanh();
        let expected1 = 0.5 * -0.4 + 0.5 * (-0.36f64).tanh();
        assert!((next[0] - expected0).abs() < 1e-15);
        assert!((next[1] - expected1).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let res = EsnReservoir::generate(&EsnConfig::new(4, 0.5, 1)).unwrap();
        assert!(res.step(&DVector::zeros(3), &[0.0]).is_err());
        assert!(res.step(&DVector::zeros(4), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let base = EsnConfig::new(10, 0.9, 0);
        assert!(EsnConfig {
            nodes: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(EsnConfig {
            spectral_radius: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(EsnConfig {
            leak_rate: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(EsnConfig {
            leak_rate: 1.5,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(EsnConfig {
            connectivity: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn observed_state_is_identity() {
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(EsnReservoir::observed_state(&x), vec![1.0, -2.0, 3.0]);
        let res = EsnReservoir::generate(&EsnConfig::new(7, 0.9, 2)).unwrap();
        assert_eq!(res.descriptor().readout_dimension, 7);
    }
}
