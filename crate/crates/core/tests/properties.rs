use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use rescomp::diagnostics::{echo_state_test, separation_test};
use rescomp::esn::{EsnConfig, EsnReservoir};
use rescomp::qlinalg::{
    hermitian_eigendecomposition, kron, partial_trace_first_qubit, unitary_from_hamiltonian, ComplexMatrix,
    HermitianOperator, C64,
};
use rescomp::qrc::{DensityMatrix, QrcConfig, QrcReservoir};
use rescomp::readout;
use rescomp::tasks::{TaskKind, TaskSpec};
use rescomp::{drive, drive_with_state, harvest, ExecutionMode, Reservoir, SeededRng, TimeSeries};

fn random_matrix(rng: &mut SeededRng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn random_hermitian(rng: &mut SeededRng, dim: usize) -> HermitianOperator {
    let a = random_matrix(rng, dim);
    HermitianOperator::new(a.add(&a.adjoint()).unwrap().scale(C64::new(0.5, 0.0))).unwrap()
}

fn random_density(rng: &mut SeededRng, dim: usize) -> DensityMatrix {
    let a = random_matrix(rng, dim);
    let p = a.mul(&a.adjoint()).unwrap();
    let tr = p.trace().re;
    DensityMatrix::new(p.scale(C64::new(1.0 / tr, 0.0))).unwrap()
}

fn inputs(seed: u64, len: usize) -> TimeSeries {
    let mut rng = SeededRng::seed_from_u64(seed);
    TimeSeries::from_scalar(&(0..len).map(|_| rng.random_range(0.0..=1.0)).collect::<Vec<_>>()).unwrap()
}

fn assert_bits_eq(a: &DMatrix<f64>, b: &DMatrix<f64>) {
    assert_eq!(a.shape(), b.shape());
    for (x, y) in a.iter().zip(b.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

fn check_composition<R: Reservoir>(res: &R, input: &TimeSeries, split: usize, start: R::State) {
    let whole = drive(res, input, Some(&start)).unwrap();
    let a = input.slice(0, split).unwrap();
    let b = input.slice(split, input.len()).unwrap();
    let (first, mid) = drive_with_state(res, &a, Some(&start)).unwrap();
    let second = drive(res, &b, Some(&mid)).unwrap();
    assert_bits_eq(&whole.states().rows(0, split).into_owned(), first.states());
    assert_bits_eq(
        &whole.states().rows(split, input.len() - split).into_owned(),
        second.states(),
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn esn_drive_composes(seed in 0u64..1000, len in 2usize..60, cut in 0.0f64..1.0) {
        let res = EsnReservoir::generate(&EsnConfig::new(15, 0.9, seed)).unwrap();
        let split = 1 + ((len - 1) as f64 * cut) as usize;
        let start = res.random_state(&mut SeededRng::seed_from_u64(seed));
        check_composition(&res, &inputs(seed, len), split.min(len - 1), start);
    }

    #[test]
    fn qrc_drive_composes(seed in 0u64..1000, n in 1usize..4, v in 1usize..4, len in 2usize..30) {
        let res = QrcReservoir::build(&QrcConfig::new(n, 1.3, v, seed)).unwrap();
        let start = random_density(&mut SeededRng::seed_from_u64(seed), 1 << n);
        check_composition(&res, &inputs(seed, len), len / 2, start);
    }

    #[test]
    fn harvest_keeps_rows(seed in 0u64..1000, len in 1usize..40, washout_frac in 0.0f64..1.0) {
        let res = EsnReservoir::generate(&EsnConfig::new(8, 0.8, seed)).unwrap();
        let traj = drive(&res, &inputs(seed, len), None).unwrap();
        let washout = ((len - 1) as f64 * washout_frac) as usize;
        let h = harvest(&traj, washout).unwrap();
        prop_assert_eq!(h.nrows(), len - washout);
        for r in 0..h.nrows() {
            for c in 0..8 {
                prop_assert_eq!(h[(r, c)].to_bits(), traj.states()[(r + washout, c)].to_bits());
            }
            prop_assert_eq!(h[(r, 8)], 1.0);
        }
    }

    #[test]
    fn tanh_states_stay_inside_unit_box(seed in 0u64..1000, scale in 0.1f64..5.0) {
        let cfg = EsnConfig { input_scaling: scale, ..EsnConfig::new(20, 1.5, seed) };
        let res = EsnReservoir::generate(&cfg).unwrap();
        let traj = drive(&res, &inputs(seed, 50), None).unwrap();
        prop_assert!(traj.states().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn esn_step_is_pure(seed in 0u64..1000, u in -2.0f64..2.0) {
        let res = EsnReservoir::generate(&EsnConfig::new(12, 0.9, seed)).unwrap();
        let x = res.random_state(&mut SeededRng::seed_from_u64(seed));
        let a = res.step(&x, &[u]).unwrap();
        let b = res.step(&x, &[u]).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn unitary_group_property(seed in 0u64..1000, dim in 1usize..9, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, dim);
        let joint = unitary_from_hamiltonian(&h, t1 + t2).unwrap();
        let split = unitary_from_hamiltonian(&h, t1).unwrap().mul(&unitary_from_hamiltonian(&h, t2).unwrap()).unwrap();
        prop_assert!(joint.max_abs_diff(&split) <= 1e-9);
    }

    #[test]
    fn partial_trace_is_linear(seed in 0u64..1000, n in 1usize..5, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, 1 << n);
        let b = random_matrix(&mut rng, 1 << n);
        let (al, be) = (C64::new(alpha, 0.0), C64::new(beta, 0.0));
        let lhs = partial_trace_first_qubit(&a.scale(al).add(&b.scale(be)).unwrap()).unwrap();
        let rhs = partial_trace_first_qubit(&a).unwrap().scale(al)
            .add(&partial_trace_first_qubit(&b).unwrap().scale(be)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn kron_mixed_product(seed in 0u64..1000, da in 1usize..4, db in 1usize..4) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let (a, c) = (random_matrix(&mut rng, da), random_matrix(&mut rng, da));
        let (b, d) = (random_matrix(&mut rng, db), random_matrix(&mut rng, db));
        let lhs = kron(&a, &b).mul(&kron(&c, &d)).unwrap();
        let rhs = kron(&a.mul(&c).unwrap(), &b.mul(&d).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
    }

    #[test]
    fn evolution_preserves_spectrum(seed in 0u64..1000, n in 1usize..5, v in 1usize..4) {
        let res = QrcReservoir::build(&QrcConfig::new(n, 2.0, v, seed)).unwrap();
        let rho = random_density(&mut SeededRng::seed_from_u64(seed ^ 7), 1 << n);
        let evolved = DensityMatrix::new(rho.matrix().conjugate_by(res.step_unitary()).unwrap()).unwrap();
        let before = rho.eigenvalues().unwrap();
        let after = evolved.eigenvalues().unwrap();
        prop_assert!(before.iter().zip(&after).all(|(x, y)| (x - y).abs() <= 1e-9));
    }

    #[test]
    fn quantum_signals_remember_previous_input(seed in 0u64..1000, n in 2usize..5, u in 0.0f64..1.0, du in 0.2f64..0.8) {
        let res = QrcReservoir::build(&QrcConfig::new(n, 1.0, 1, seed)).unwrap();
        let other = (u + du) % 1.0;
        let run = |first: f64| {
            let rho = DensityMatrix::maximally_mixed(n);
            let mid = res.step(&rho, first).unwrap().0;
            res.step(&mid, 0.5).unwrap().1
        };
        let (a, b) = (run(u), run(other));
        let beyond = (1..n).map(|j| (a[j] - b[j]).abs()).fold(0.0, f64::max);
        prop_assert!(beyond > 1e-9, "signals beyond the injected qubit unchanged: {beyond:e}");
    }

    #[test]
    fn ridge_residual_grows_with_lambda(seed in 0u64..1000, rows in 20usize..80, k in 1usize..10) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let x = DMatrix::from_fn(rows, k + 1, |_, c| if c == k { 1.0 } else { rng.random_range(-1.0..1.0) });
        let y = DMatrix::from_fn(rows, 1, |_, _| rng.random_range(-1.0..1.0));
        let residual = |lambda: f64| {
            let ro = readout::fit(&x, &y, lambda).unwrap();
            (ro.predict(&x).unwrap() - &y).norm_squared()
        };
        let mut previous = residual(0.0);
        for lambda in [1e-4, 1e-2, 1.0, 100.0] {
            let r = residual(lambda);
            prop_assert!(r >= previous * (1.0 - 1e-9));
            previous = r;
        }
    }

    #[test]
    fn column_rescaling_leaves_predictions(seed in 0u64..1000, c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let x = DMatrix::from_fn(40, 6, |_, col| if col == 5 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let y = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-1.0..1.0));
        let mut scaled = x.clone();
        scaled.column_mut(2).scale_mut(c);
        let p = readout::fit(&x, &y, 0.0).unwrap().predict(&x).unwrap();
        let q = readout::fit(&scaled, &y, 0.0).unwrap().predict(&scaled).unwrap();
        prop_assert!((p - q).abs().max() <= 1e-9);
    }

    #[test]
    fn tasks_are_normalisable_and_aligned(seed in 0u64..1000, len in 30usize..300, kind in prop_oneof![
        Just(TaskKind::Narma10), Just(TaskKind::DelayMemory), Just(TaskKind::SinePrediction)
    ]) {
        let spec = TaskSpec { delay: 3, ..TaskSpec::new(kind, len, seed) };
        let data = spec.generate().unwrap();
        prop_assert_eq!(data.input.len(), data.target.len());
        prop_assert_eq!(&data, &spec.generate().unwrap());
        let norm = data.normalized_input().unwrap();
        prop_assert_eq!(norm.data().min(), 0.0);
        prop_assert!((norm.data().max() - 1.0).abs() <= 1e-15);
        let back = data.input_normalization.invert_series(&norm).unwrap();
        prop_assert!((back.data() - data.input.data()).abs().max() <= 1e-12);
    }

    #[test]
    fn separation_is_symmetric(seed in 0u64..1000) {
        let res = EsnReservoir::generate(&EsnConfig::new(10, 0.9, seed)).unwrap();
        let (a, b) = (inputs(seed, 80), inputs(seed + 1, 80));
        let ab = separation_test(&res, &a, &b, 10).unwrap();
        let ba = separation_test(&res, &b, &a, 10).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
    }

    #[test]
    fn echo_state_distance_stays_converged(seed in 0u64..1000) {
        let res = EsnReservoir::generate(&EsnConfig::new(30, 0.8, seed)).unwrap();
        let out = echo_state_test(&res, &inputs(seed, 300), 3, 1e-6, seed, ExecutionMode::Sequential).unwrap();
        let step = out.convergence_step.expect("contracting reservoir converges");
        prop_assert!(out.final_distance <= out.distances[step - 1]);
    }
}

#[test]
fn qrc_inputs_outside_unit_interval_rejected() {
    let res = QrcReservoir::build(&QrcConfig::new(2, 1.0, 1, 0)).unwrap();
    let bad = TimeSeries::from_scalar(&[0.2, 1.5]).unwrap();
    assert!(drive(&res, &bad, None).is_err());
}

#[test]
fn fixed_seed_reproduces_trajectory() {
    let cfg = QrcConfig::new(3, 0.7, 2, 11);
    let a = drive(&QrcReservoir::build(&cfg).unwrap(), &inputs(1, 40), None).unwrap();
    let b = drive(&QrcReservoir::build(&cfg).unwrap(), &inputs(1, 40), None).unwrap();
    assert_bits_eq(a.states(), b.states());
    let eig = hermitian_eigendecomposition(QrcReservoir::build(&cfg).unwrap().hamiltonian()).unwrap();
    assert!(
        eig.reconstruct()
            .max_abs_diff(QrcReservoir::build(&cfg).unwrap().hamiltonian().matrix())
            < 1e-12
    );
}
