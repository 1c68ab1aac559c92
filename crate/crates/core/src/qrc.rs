//! Quantum reservoir backend: an `N`-qubit density matrix driven by writing
//! each input into the first qubit, evolved under a fixed random
//! transverse-field Ising Hamiltonian and read out through single-qubit
//! Pauli-Z expectations sampled at `V` sub-intervals of every step.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{
    embed_single_qubit, hermitian_eigendecomposition, kron, partial_trace_first_qubit, pauli_x, pauli_z,
    unitary_from_spectrum, z_signs, ComplexMatrix, HermitianOperator, C64,
};
use crate::reservoir::{Reservoir, ReservoirDescriptor, ReservoirKind, TimeSeries};
use crate::SeededRng;

pub const MAX_QUBITS: usize = 12;

const DENSITY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = 1e-9;
/// Drift beyond this after a step means the arithmetic is corrupted.
const CORRUPTION_TOLERANCE: f64 = 1e-8;

/// Hermitian, unit-trace, positive semidefinite state of `N` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        crate::qlinalg::qubit_count(matrix.dim())?;
        let rho = DensityMatrix(matrix);
        let dev = rho.0.hermitian_deviation();
        if dev > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("Hermitian deviation {dev:e}")));
        }
        let tr = rho.0.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOLERANCE || tr.im.abs() > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = rho.min_eigenvalue()?;
        if min < -PSD_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// `I / 2^N`.
    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1usize << qubits;
        DensityMatrix(ComplexMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0)))
    }

    /// Diagonal state `sum_b p_b |b><b|`; `weights` are normalised.
    pub fn diagonal_mixture(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) || !(total > 0.0) {
            return Err(Error::param("mixture weights must be nonnegative with positive sum"));
        }
        let diag: Vec<C64> = weights.iter().map(|&w| C64::new(w / total, 0.0)).collect();
        Self::new(ComplexMatrix::diagonal(&diag))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn qubits(&self) -> usize {
        self.0.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.0.hermitian_deviation()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let sym = ComplexMatrix::from_fn(self.dim(), |i, j| {
            (self.0.entries()[(i, j)] + self.0.entries()[(j, i)].conj()) * 0.5
        });
        Ok(hermitian_eigendecomposition(&HermitianOperator::new(sym)?)?.eigenvalues)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QrcConfig {
    pub qubits: usize,
    pub tau: f64,
    #[serde(default = "one_usize")]
    pub virtual_nodes: usize,
    #[serde(default = "one_f64")]
    pub coupling_scale: f64,
    #[serde(default = "one_f64")]
    pub field: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl QrcConfig {
    pub fn new(qubits: usize, tau: f64, virtual_nodes: usize, seed: u64) -> Self {
        QrcConfig {
            qubits,
            tau,
            virtual_nodes,
            coupling_scale: 1.0,
            field: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 || self.qubits > MAX_QUBITS {
            return Err(Error::param(format!(
                "qrc.qubits must lie in 1..={MAX_QUBITS}, got {}",
                self.qubits
            )));
        }
        if self.virtual_nodes == 0 {
            return Err(Error::param("qrc.virtual_nodes must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param("qrc.tau must be positive"));
        }
        if !self.coupling_scale.is_finite() || !self.field.is_finite() {
            return Err(Error::param("qrc.coupling_scale and qrc.field must be finite"));
        }
        Ok(())
    }

    pub fn readout_dimension(&self) -> usize {
        self.qubits * self.virtual_nodes
    }
}

#[derive(Clone, Debug)]
pub struct QrcReservoir {
    config: QrcConfig,
    hamiltonian: HermitianOperator,
    step_unitary: ComplexMatrix,
    observables: Vec<HermitianOperator>,
    signs: Vec<Vec<f64>>,
}

impl QrcReservoir {
    /// `H = sum_{i<j} J_ij X_i X_j + h sum_i Z_i`, `J_ij ~ U[-J/2, J/2]` from the seed.
    pub fn build(config: &QrcConfig) -> Result<Self> {
        config.validate()?;
        let h = ising_hamiltonian(config.qubits, &couplings(config), config.field)?;
        Self::with_hamiltonian(config, h)
    }

    /// Reservoir with an explicit Hamiltonian.
    pub fn with_hamiltonian(config: &QrcConfig, hamiltonian: HermitianOperator) -> Result<Self> {
        config.validate()?;
        let n = config.qubits;
        if hamiltonian.dim() != 1 << n {
            return Err(Error::dim(format!(
                "Hamiltonian dimension {} does not match {n} qubits",
                hamiltonian.dim()
            )));
        }
        let eig = hermitian_eigendecomposition(&hamiltonian)?;
        let step_unitary = unitary_from_spectrum(&eig, config.tau / config.virtual_nodes as f64);
        let observables = (0..n)
            .map(|q| HermitianOperator::new(embed_single_qubit(&pauli_z(), q, n)?))
            .collect::<Result<Vec<_>>>()?;
        let signs = (0..n).map(|q| z_signs(q, n)).collect();
        Ok(QrcReservoir {
            config: config.clone(),
            hamiltonian,
            step_unitary,
            observables,
            signs,
        })
    }

    pub fn config(&self) -> &QrcConfig {
        &self.config
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    /// `exp(-i H tau / V)`.
    pub fn step_unitary(&self) -> &ComplexMatrix {
        &self.step_unitary
    }

    /// `Z_i` embedded at each site.
    pub fn observables(&self) -> &[HermitianOperator] {
        &self.observables
    }

    /// One input step: inject, then `V` sub-evolutions each followed by a
    /// readout of every `<Z_i>`. Signals are virtual-node major.
    pub fn step(&self, rho: &DensityMatrix, u: f64) -> Result<(DensityMatrix, Vec<f64>)> {
        if rho.dim() != 1 << self.config.qubits {
            return Err(Error::dim("density matrix does not match qubit count"));
        }
        let mut state = inject(rho, u)?.0;
        let n = self.config.qubits;
        let mut signals = Vec::with_capacity(n * self.config.virtual_nodes);
        for _ in 0..self.config.virtual_nodes {
            state = state.conjugate_by(&self.step_unitary)?;
            for signs in &self.signs {
                signals.push(z_expectation(&state, signs));
            }
        }
        let tr = state.trace();
        let dev = state.hermitian_deviation();
        if (tr.re - 1.0).abs() > CORRUPTION_TOLERANCE || dev > CORRUPTION_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!(
                "state corrupted during evolution: trace {tr}, Hermitian deviation {dev:e}"
            )));
        }
        Ok((DensityMatrix(state), signals))
    }
}

/// Couplings `J_ij` for `i < j` in lexicographic order.
pub fn couplings(config: &QrcConfig) -> Vec<f64> {
    let mut rng = SeededRng::seed_from_u64(config.seed);
    let half = config.coupling_scale / 2.0;
    let n = config.qubits;
    (0..n * n.saturating_sub(1) / 2)
        .map(|_| {
            if half > 0.0 {
                rng.random_range(-half..=half)
            } else {
                0.0
            }
        })
        .collect()
}

/// Fully connected transverse-field Ising Hamiltonian from explicit couplings.
pub fn ising_hamiltonian(qubits: usize, couplings: &[f64], field: f64) -> Result<HermitianOperator> {
    if couplings.len() != qubits * qubits.saturating_sub(1) / 2 {
        return Err(Error::dim("coupling count must be N(N-1)/2"));
    }
    let d = 1usize << qubits;
    let xs = (0..qubits)
        .map(|q| embed_single_qubit(&pauli_x(), q, qubits))
        .collect::<Result<Vec<_>>>()?;
    let mut h = DMatrix::<C64>::zeros(d, d);
    let mut idx = 0;
    for i in 0..qubits {
        for j in (i + 1)..qubits {
            h += xs[i].entries() * xs[j].entries() * C64::new(couplings[idx], 0.0);
            idx += 1;
        }
    }
    for q in 0..qubits {
        let signs = z_signs(q, qubits);
        for (b, s) in signs.iter().enumerate() {
            h[(b, b)] += C64::new(field * s, 0.0);
        }
    }
    HermitianOperator::new(ComplexMatrix::new(h)?)
}

/// `|psi><psi|` with `|psi> = sqrt(1-u)|0> + sqrt(u)|1>`.
pub fn encode_input(u: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::param(format!("input {u} outside [0, 1]; rescale first")));
    }
    let off = (u * (1.0 - u)).sqrt();
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0 - u, 0.0),
            C64::new(off, 0.0),
            C64::new(off, 0.0),
            C64::new(u, 0.0),
        ],
    );
    Ok(DensityMatrix(ComplexMatrix::from_raw(m)))
}

/// Replaces the first qubit: `rho_u (x) Tr_1(rho)`.
pub fn inject(rho: &DensityMatrix, u: f64) -> Result<DensityMatrix> {
    let encoded = encode_input(u)?;
    let rest = partial_trace_first_qubit(rho.matrix())?;
    Ok(DensityMatrix(kron(encoded.matrix(), &rest)))
}

fn z_expectation(state: &ComplexMatrix, signs: &[f64]) -> f64 {
    let m = state.entries();
    signs.iter().enumerate().map(|(b, s)| s * m[(b, b)].re).sum()
}

impl Reservoir for QrcReservoir {
    type State = DensityMatrix;

    fn descriptor(&self) -> ReservoirDescriptor {
        let d = 1usize << self.config.qubits;
        ReservoirDescriptor {
            kind: ReservoirKind::Quantum,
            readout_dimension: self.config.readout_dimension(),
            state_dimension: d * d,
        }
    }

    fn input_dimension(&self) -> usize {
        1
    }

    fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::maximally_mixed(self.config.qubits)
    }

    fn advance(&self, state: &DensityMatrix, input: &[f64]) -> Result<(DensityMatrix, Vec<f64>)> {
        match input {
            [u] => self.step(state, *u),
            _ => Err(Error::dim("quantum reservoir takes one input channel")),
        }
    }

    fn random_state(&self, rng: &mut SeededRng) -> DensityMatrix {
        let d = 1usize << self.config.qubits;
        let weights: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-12).collect();
        let total: f64 = weights.iter().sum();
        let diag: Vec<C64> = weights.iter().map(|w| C64::new(w / total, 0.0)).collect();
        DensityMatrix(ComplexMatrix::diagonal(&diag))
    }

    fn state_distance(&self, a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        a.matrix()
            .entries()
            .iter()
            .zip(b.matrix().entries().iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, input: &TimeSeries) -> Result<()> {
        if input.channels() != 1 {
            return Err(Error::dim(format!(
                "quantum reservoir takes a one-channel input, got {} channels",
                input.channels()
            )));
        }
        if let Some(step) = input.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param(format!(
                "input at step {step} outside [0, 1]; normalise before driving"
            )));
        }
        Ok(())
    }
}
