//! Dense complex linear algebra for small qubit registers.
//!
//! Qubit ordering: qubit 1 is the most significant bit of the
//! computational-basis index, so for `N` qubits the basis state
//! `|q1 q2 ... qN>` has index `q1 * 2^(N-1) + ... + qN`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use nalgebra::Complex;
pub type C64 = Complex<f64>;

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_IMAG_TOLERANCE: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::dim(format!(
                "matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("matrix entries must be finite"));
        }
        Ok(ComplexMatrix(entries))
    }

    pub(crate) fn from_raw(entries: DMatrix<C64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        ComplexMatrix(entries)
    }

    pub fn from_real(entries: &DMatrix<f64>) -> Result<Self> {
        Self::new(entries.map(|v| C64::new(v, 0.0)))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        ComplexMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dim("matrix product of unequal dimensions"));
        }
        Ok(ComplexMatrix(&self.0 * &other.0))
    }

    pub fn scale(&self, factor: C64) -> Self {
        ComplexMatrix(&self.0 * factor)
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dim("sum of unequal dimensions"));
        }
        Ok(ComplexMatrix(&self.0 + &other.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.diagonal().iter().copied().fold(ZERO, |a, b| a + b)
    }

    /// Largest entrywise `|M - M^dagger|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise `|A - B|`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `U M U^dagger`.
    pub fn conjugate_by(&self, unitary: &ComplexMatrix) -> Result<Self> {
        if self.dim() != unitary.dim() {
            return Err(Error::dim("similarity transform of unequal dimensions"));
        }
        let left = &unitary.0 * &self.0;
        Ok(ComplexMatrix(left * unitary.0.adjoint()))
    }
}

/// Hermitian matrix: Hamiltonians and observables.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian(dev));
        }
        Ok(HermitianOperator(matrix))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

#[derive(Clone, Debug)]
pub struct Eigendecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl Eigendecomposition {
    /// `U diag(lambda) U^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d: Vec<C64> = self.eigenvalues.iter().map(|&l| C64::new(l, 0.0)).collect();
        self.apply_spectral(&d)
    }

    /// `U diag(values) U^dagger` for per-eigenvalue weights.
    pub fn apply_spectral(&self, values: &[C64]) -> ComplexMatrix {
        let u = self.eigenvectors.entries();
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            for z in scaled.column_mut(j).iter_mut() {
                *z *= v;
            }
        }
        ComplexMatrix::from_raw(scaled * u.adjoint())
    }
}

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
pub fn hermitian_eigendecomposition(op: &HermitianOperator) -> Result<Eigendecomposition> {
    let dev = op.matrix().hermitian_deviation();
    if dev > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian(dev));
    }
    let eig = nalgebra::SymmetricEigen::new(op.matrix().entries().clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = op.dim();
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigendecomposition {
        eigenvalues,
        eigenvectors: ComplexMatrix::from_raw(vectors),
    })
}

/// `exp(-i H tau)` via the spectral decomposition of `H`.
pub fn unitary_from_hamiltonian(hamiltonian: &HermitianOperator, tau: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eigendecomposition(hamiltonian)?;
    Ok(unitary_from_spectrum(&eig, tau))
}

pub(crate) fn unitary_from_spectrum(eig: &Eigendecomposition, tau: f64) -> ComplexMatrix {
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&l| C64::from_polar(1.0, -l * tau))
        .collect();
    eig.apply_spectral(&phases)
}

/// Kronecker product `A (x) B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_raw(a.entries().kronecker(b.entries()))
}

/// Returns `log2(dim)` when `dim` is a power of two of at least 2.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::dim(format!("dimension {dim} is not a power of two >= 2")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Trace over the first (most significant) qubit.
pub fn partial_trace_first_qubit(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    qubit_count(rho.dim())?;
    let half = rho.dim() / 2;
    let m = rho.entries();
    Ok(ComplexMatrix::from_fn(half, |i, j| m[(i, j)] + m[(i + half, j + half)]))
}

/// `Re Tr(rho A)`; errors if the imaginary part exceeds tolerance.
pub fn trace_inner(rho: &ComplexMatrix, observable: &HermitianOperator) -> Result<f64> {
    let a = observable.matrix().entries();
    if rho.dim() != a.nrows() {
        return Err(Error::dim("trace of a product of unequal dimensions"));
    }
    let r = rho.entries();
    // Tr(rho A) = sum_ij rho_ij A_ji
    let mut acc = ZERO;
    for j in 0..r.ncols() {
        for i in 0..r.nrows() {
            acc += r[(i, j)] * a[(j, i)];
        }
    }
    if acc.im.abs() > TRACE_IMAG_TOLERANCE {
        return Err(Error::InvalidDensityMatrix(format!(
            "Tr(rho A) has imaginary part {:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO })
}

pub fn pauli_y() -> ComplexMatrix {
    let i = C64::new(0.0, 1.0);
    ComplexMatrix::from_raw(DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]))
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[ONE, -ONE])
}

/// Single-qubit operator acting on qubit `site` (0-based, 0 = most significant).
pub fn embed_single_qubit(op: &ComplexMatrix, site: usize, qubits: usize) -> Result<ComplexMatrix> {
    if op.dim() != 2 || site >= qubits {
        return Err(Error::dim(format!("cannot embed at site {site} of {qubits} qubits")));
    }
    let mut acc = ComplexMatrix::identity(1);
    for q in 0..qubits {
        let factor = if q == site {
            op.clone()
        } else {
            ComplexMatrix::identity(2)
        };
        acc = kron(&acc, &factor);
    }
    Ok(acc)
}

/// Diagonal of `Z` on qubit `site` in the computational basis, as signs.
pub fn z_signs(site: usize, qubits: usize) -> Vec<f64> {
    let shift = qubits - 1 - site;
    (0..1usize << qubits)
        .map(|b| if (b >> shift) & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(dim: usize, rng: &mut crate::SeededRng) -> ComplexMatrix {
        ComplexMatrix::from_fn(dim, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(dim: usize, rng: &mut crate::SeededRng) -> HermitianOperator {
        let a = random_matrix(dim, rng);
        let h = a.add(&a.adjoint()).unwrap().scale(C64::new(0.5, 0.0));
        HermitianOperator::new(h).unwrap()
    }

    /// Random density matrix `A A^dagger / Tr`.
    pub(crate) fn random_density(dim: usize, rng: &mut crate::SeededRng) -> ComplexMatrix {
        let a = random_matrix(dim, rng);
        let p = a.mul(&a.adjoint()).unwrap();
        let t = p.trace();
        let m = p.scale(C64::new(1.0 / t.re, 0.0));
        // exact Hermitian symmetrisation
        let n = m.dim();
        ComplexMatrix::from_fn(n, |i, j| {
            if i <= j {
                m.entries()[(i, j)]
            } else {
                m.entries()[(j, i)].conj()
            }
        })
    }

    fn rng(seed: u64) -> crate::SeededRng {
        crate::SeededRng::seed_from_u64(seed)
    }

    #[test]
    fn eigen_identity_and_pauli_z() {
        let id = HermitianOperator::new(ComplexMatrix::identity(4)).unwrap();
        let e = hermitian_eigendecomposition(&id).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        let z = HermitianOperator::new(pauli_z()).unwrap();
        let e = hermitian_eigendecomposition(&z).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 1.0]);
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut r = rng(11);
        for dim in [2, 8, 16, 64] {
            let h = random_hermitian(dim, &mut r);
            let e = hermitian_eigendecomposition(&h).unwrap();
            assert!(e.reconstruct().max_abs_diff(h.matrix()) <= 1e-10);
            let u = &e.eigenvectors;
            assert!(u.mul(&u.adjoint()).unwrap().max_abs_diff(&ComplexMatrix::identity(dim)) <= 1e-10);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = ComplexMatrix::from_fn(2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let h = HermitianOperator::new(ComplexMatrix::zeros(4)).unwrap();
        let u = unitary_from_hamiltonian(&h, 1.7).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn exponential_of_pauli_x_closed_form() {
        // exp(-i theta X) = cos(theta) I - i sin(theta) X
        let h = HermitianOperator::new(pauli_x()).unwrap();
        for &theta in &[0.3, std::f64::consts::FRAC_PI_2, 2.1] {
            let u = unitary_from_hamiltonian(&h, theta).unwrap();
            let expected = ComplexMatrix::identity(2)
                .scale(C64::new(theta.cos(), 0.0))
                .add(&pauli_x().scale(C64::new(0.0, -theta.sin())))
                .unwrap();
            assert!(u.max_abs_diff(&expected) < 1e-14);
        }
        let u = unitary_from_hamiltonian(&h, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(u.entries()[(0, 0)].norm() < 1e-15);
        assert!((u.entries()[(0, 1)] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn exponential_unitarity_and_group_property() {
        let mut r = rng(5);
        let h = random_hermitian(16, &mut r);
        let u1 = unitary_from_hamiltonian(&h, 0.4).unwrap();
        let u2 = unitary_from_hamiltonian(&h, 1.1).unwrap();
        let u12 = unitary_from_hamiltonian(&h, 1.5).unwrap();
        assert!(
            u1.mul(&u1.adjoint())
                .unwrap()
                .max_abs_diff(&ComplexMatrix::identity(16))
                < 1e-10
        );
        assert!(u1.mul(&u2).unwrap().max_abs_diff(&u12) < 1e-9);
    }

    #[test]
    fn kron_basics() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let c = |v: f64| C64::new(v, 0.0);
        let a = ComplexMatrix::diagonal(&[c(2.0), c(3.0)]);
        let b = ComplexMatrix::diagonal(&[c(5.0), c(7.0)]);
        assert_eq!(
            kron(&a, &b),
            ComplexMatrix::diagonal(&[c(10.0), c(14.0), c(15.0), c(21.0)])
        );
    }

    #[test]
    fn kron_trace_and_mixed_product() {
        let mut r = rng(2);
        let (a, b, c, d) = (
            random_matrix(2, &mut r),
            random_matrix(4, &mut r),
            random_matrix(2, &mut r),
            random_matrix(4, &mut r),
        );
        let lhs = kron(&a, &b).trace();
        assert!((lhs - a.trace() * b.trace()).norm() < 1e-12);
        let prod = kron(&a, &b).mul(&kron(&c, &d)).unwrap();
        let expect = kron(&a.mul(&c).unwrap(), &b.mul(&d).unwrap());
        assert!(prod.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut r = rng(9);
        let sigma = random_density(2, &mut r);
        let eta = random_density(4, &mut r);
        let reduced = partial_trace_first_qubit(&kron(&sigma, &eta)).unwrap();
        assert!(reduced.max_abs_diff(&eta) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_sum_oracle() {
        let mut r = rng(3);
        let rho = random_density(8, &mut r);
        let reduced = partial_trace_first_qubit(&rho).unwrap();
        // Explicit loop over basis |q1, rest>: sum_q1 <q1 i|rho|q1 j>.
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for q1 in 0..2usize {
                    acc += rho.entries()[((q1 << 2) | i, (q1 << 2) | j)];
                }
                assert_eq!(reduced.entries()[(i, j)], acc);
            }
        }
        assert!((reduced.trace() - rho.trace()).norm() < 1e-15);
        assert!(partial_trace_first_qubit(&ComplexMatrix::identity(3)).is_err());
        assert!(partial_trace_first_qubit(&ComplexMatrix::identity(1)).is_err());
    }

    #[test]
    fn partial_trace_is_linear() {
        let mut r = rng(4);
        let (rho, sigma) = (random_density(8, &mut r), random_density(8, &mut r));
        let (a, b) = (C64::new(0.3, 0.0), C64::new(-1.2, 0.5));
        let lhs = partial_trace_first_qubit(&rho.scale(a).add(&sigma.scale(b)).unwrap()).unwrap();
        let rhs = partial_trace_first_qubit(&rho)
            .unwrap()
            .scale(a)
            .add(&partial_trace_first_qubit(&sigma).unwrap().scale(b))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn trace_inner_cases() {
        let ket0 = ComplexMatrix::diagonal(&[ONE, ZERO]);
        let z = HermitianOperator::new(pauli_z()).unwrap();
        assert_eq!(trace_inner(&ket0, &z).unwrap(), 1.0);
        let mixed = ComplexMatrix::identity(4).scale(C64::new(0.25, 0.0));
        let zz = HermitianOperator::new(embed_single_qubit(&pauli_z(), 1, 2).unwrap()).unwrap();
        assert_eq!(trace_inner(&mixed, &zz).unwrap(), 0.0);

        let mut r = rng(8);
        let rho = random_density(8, &mut r);
        let a = random_hermitian(8, &mut r);
        let naive = {
            let prod = rho.mul(a.matrix()).unwrap();
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..8 {
                acc += prod.entries()[(i, i)];
            }
            acc.re
        };
        assert!((trace_inner(&rho, &a).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn trace_inner_flags_imaginary_part() {
        let not_hermitian = ComplexMatrix::from_fn(2, |i, j| if i == 0 && j == 1 { C64::new(0.0, 1.0) } else { ZERO });
        let x = HermitianOperator::new(pauli_x()).unwrap();
        assert!(trace_inner(&not_hermitian, &x).is_err());
    }

    #[test]
    fn z_signs_match_embedded_operator() {
        for q in 0..3 {
            let z = embed_single_qubit(&pauli_z(), q, 3).unwrap();
            let signs = z_signs(q, 3);
            for (b, s) in signs.iter().enumerate() {
                assert_eq!(z.entries()[(b, b)].re, *s);
            }
        }
        let _ = pauli_y();
    }
}
