use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoshadow::clifford::Locality;
use thermoshadow::exactsim::*;
use thermoshadow::pauli::*;
use thermoshadow::pvgs::*;

fn ansatz(h: &Hamiltonian, depth: usize, kind: LayoutKind, theta: Vec<f64>) -> AnsatzState {
    let layout = Arc::new(AnsatzLayout::hamiltonian_variational(h, depth, kind).unwrap());
    AnsatzState::new(layout, theta).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn central_difference(a: &AnsatzState, m: usize, step: f64) -> Vec<Complex64> {
    let mut plus = a.clone();
    plus.theta[m] += step;
    let mut minus = a.clone();
    minus.theta[m] -= step;
    let p = plus.state().unwrap();
    let q = minus.state().unwrap();
    p.amplitudes()
        .iter()
        .zip(q.amplitudes())
        .map(|(x, y)| (x - y) / (2.0 * step))
        .collect()
}

fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn mu0_examples() {
    let bell = prepare_mu0(1).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let a = bell.amplitudes();
    assert_abs_diff_eq!(a[0].re, r, epsilon = 1e-14);
    assert_abs_diff_eq!(a[3].re, r, epsilon = 1e-14);
    assert_abs_diff_eq!(a[1].norm() + a[2].norm(), 0.0, epsilon = 1e-14);

    let n = 3;
    let mu = prepare_mu0(n).unwrap();
    let dim = 1 << n;
    let psi = DMatrix::from_column_slice(dim, dim, mu.amplitudes());
    let rho = &psi * psi.adjoint();
    let purity = (&rho * &rho).trace().re;
    assert_abs_diff_eq!(purity, 1.0 / dim as f64, epsilon = 1e-10);

    let h = ham_diagonal(3).unwrap();
    let g = exact_gibbs(&h, 0.0).unwrap();
    assert_abs_diff_eq!(g.state.overlap(&mu).unwrap(), 1.0, epsilon = 1e-10);
    assert!(matches!(prepare_mu0(11), Err(thermoshadow::Error::Resource(_))));
}

#[test]
fn single_rotation_derivative_direction() {
    // Hamiltonian X on one qubit: a single factor rotation on the doubled register.
    let h = Hamiltonian::new(1, vec![PauliTerm::new(1.0, "X".parse().unwrap())]).unwrap();
    let a = ansatz(&h, 1, LayoutKind::Grouped, vec![0.37]);
    let d = a.derivative_state(0).unwrap();
    let fd = central_difference(&a, 0, 1e-5);
    let cos = inner(&d, &fd).re / (inner(&d, &d).re.sqrt() * inner(&fd, &fd).re.sqrt());
    assert!(cos >= 1.0 - 1e-6, "cosine {cos}");
    assert!(a.derivative_state(1).is_err());
}

#[test]
fn shift_by_pi_is_sign_flip() {
    let h = ham_ising(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = ansatz(&h, 1, LayoutKind::PerTerm, random_theta(&mut rng, 1));
    let w = base.layout.layers[0][0].weight;
    let mut shifted = base.clone();
    shifted.theta[0] += std::f64::consts::PI / w;
    let a = base.state().unwrap();
    let b = shifted.state().unwrap();
    let neg: Vec<Complex64> = a.amplitudes().iter().map(|v| -v).collect();
    assert!(dist(b.amplitudes(), &neg) < 1e-12);
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (h, kind) in [
        (ham_ising(2).unwrap(), LayoutKind::Grouped),
        (ham_ising(3).unwrap(), LayoutKind::PerTerm),
        (ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap(), LayoutKind::Grouped),
    ] {
        let a = ansatz(&h, 6, kind, random_theta(&mut rng, 6));
        for m in 0..6 {
            let d = a.derivative_state(m).unwrap();
            let fd = central_difference(&a, m, 1e-5);
            assert!(dist(&d, &fd) <= 1e-4, "m={m}: {}", dist(&d, &fd));
        }
    }
}

#[test]
fn a_matrix_is_gram() {
    let h = ham_ising(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = ansatz(&h, 6, LayoutKind::Grouped, random_theta(&mut rng, 6));
    let m = build_a_matrix(&a, AMode::Exact, 0).unwrap();
    let ds = a.derivative_states().unwrap();
    for i in 0..6 {
        assert_abs_diff_eq!(m[(i, i)], inner(&ds[i], &ds[i]).re, epsilon = 1e-12);
        assert!(m[(i, i)] > 0.0);
        for j in 0..6 {
            assert_abs_diff_eq!(m[(i, j)], m[(j, i)], epsilon = 1e-10);
        }
    }
    assert!(m.symmetric_eigenvalues().min() >= -1e-8);
}

#[test]
fn shot_a_matrix_is_consistent() {
    let h = ham_ising(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = ansatz(&h, 4, LayoutKind::Grouped, random_theta(&mut rng, 4));
    let exact = build_a_matrix(&a, AMode::Exact, 0).unwrap();
    let shots = 1_000_000u64;
    let est = build_a_matrix(&a, AMode::Shots(shots), 17).unwrap();
    for n in 0..4 {
        for m in 0..4 {
            // Each Hadamard test has variance (1 − Re²)/shots.
            let mut var = 0.0;
            for (k, fk) in a.layout.layers[n].iter().enumerate() {
                for (l, fl) in a.layout.layers[m].iter().enumerate() {
                    let re = a
                        .shifted_state(n, k)
                        .unwrap()
                        .inner(&a.shifted_state(m, l).unwrap())
                        .unwrap()
                        .re;
                    var += (fk.weight * fl.weight).powi(2) * (1.0 - re * re).max(0.0) / shots as f64;
                }
            }
            let diff = (est[(n, m)] - exact[(n, m)]).abs();
            assert!(diff <= 3.0 * var.sqrt() + 1e-12, "({n},{m}) diff {diff} sigma {}", var.sqrt());
        }
    }
    assert!(build_a_matrix(&a, AMode::Shots(0), 0).is_err());
}

#[test]
fn c_vector_vanishes_at_zero_step() {
    let h = ham_ising(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = ansatz(&h, 5, LayoutKind::Grouped, random_theta(&mut rng, 5));
    let c = build_c_vector(&a, &h, 0.0, CMode::Exact, 0).unwrap();
    assert!(c.c.iter().all(|v| *v == 0.0));
    assert_eq!(c.e_beta, 1.0);
}

#[test]
fn c_vector_step_size_error() {
    let h = ham_ising(2).unwrap();
    let a = ansatz(&h, 2, LayoutKind::Grouped, vec![0.0, 0.0]);
    // ⟨μ0|H|μ0⟩ = Tr(H)/4 = 0, so use a shifted Hamiltonian with positive mean.
    let mut terms = h.terms().to_vec();
    terms.push(PauliTerm::new(1.0, PauliString::identity(2).unwrap()));
    let shifted = Hamiltonian::new(2, terms).unwrap();
    assert!(matches!(
        build_c_vector(&a, &shifted, 1.5, CMode::Exact, 0),
        Err(thermoshadow::Error::StepSize { .. })
    ));
}

#[test]
fn c_vector_norm_bound() {
    let h = ham_ising(2).unwrap();
    let spec = spectrum(&h, &DenseLimits::default()).unwrap();
    let lmax = spec.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut k_fit: f64 = 0.0;
    for _ in 0..100 {
        let depth = rng.gen_range(1..=8);
        let a = ansatz(&h, depth, LayoutKind::Grouped, random_theta(&mut rng, depth));
        let db = rng.gen_range(0.001..0.1);
        let c = build_c_vector(&a, &h, db, CMode::Exact, 0).unwrap();
        let ratio = c.c.amax() / (db * lmax / c.e_beta.sqrt());
        k_fit = k_fit.max(ratio);
    }
    assert!(k_fit <= 3.0, "fitted K = {k_fit}");
}

#[test]
fn shadow_c_vector_is_consistent() {
    let h = ham_ising(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = ansatz(&h, 2, LayoutKind::Grouped, random_theta(&mut rng, 2));
    let db = 0.1;
    let exact = build_c_vector(&a, &h, db, CMode::Exact, 0).unwrap();
    let samples = 10_000;
    let mode = CMode::Shadow {
        samples,
        groups: 5,
        locality: Locality::Global,
    };
    let est = build_c_vector(&a, &h, db, mode, 77).unwrap();
    assert_eq!(est.snapshots, samples * 4);
    // Global shadow Pauli values on 2n+1 qubits have variance about 2^(2n+1) + 1.
    let var = (1u64 << 5) as f64 + 1.0;
    let se = (var / samples as f64).sqrt() * 1.25;
    let e = exact.e_beta;
    let tau = 0.5 * db;
    let scale_i = (1.0 / e.sqrt() - 1.0).abs();
    let scale_h = tau / e.sqrt() * h.one_norm();
    for m in 0..2 {
        let wsum: f64 = a.layout.layers[m].iter().map(|f| f.weight.abs()).sum();
        let tol = 3.0 * se * wsum * (scale_i + scale_h) + 0.05 * exact.c[m].abs();
        assert!((est.c[m] - exact.c[m]).abs() <= tol, "m={m}: {} vs {}", est.c[m], exact.c[m]);
    }
    assert!((est.energy - exact.energy).abs() < 3.0 * se * h.one_norm());
}

#[test]
fn solve_step_examples() {
    let c = DVector::from_vec(vec![0.3, -1.0]);
    let x = solve_step(&DMatrix::identity(2, 2), &c, 1e-6).unwrap();
    assert!((x - &c / (1.0 + 1e-6)).norm() < 1e-14);

    // Rank-deficient Gram matrix: residual equals the out-of-range part of C.
    let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
    let a = &v * v.transpose();
    let c = DVector::from_vec(vec![1.0, 0.0, 1.0]);
    let x = solve_step(&a, &c, 1e-6).unwrap();
    assert!(x.iter().all(|t| t.is_finite()));
    let proj = &v * (v.dot(&c) / v.dot(&v));
    assert!(((&a * &x) - &proj).norm() < 1e-5);

    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let c = DVector::from_vec(vec![1.0, 1.0]);
    let x = solve_step(&a, &c, 0.0).unwrap();
    let oracle = a.clone().try_inverse().unwrap() * &c;
    assert!((x - oracle).norm() < 1e-8);

    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    assert!(solve_step(&asym, &c, 0.0).is_err());
}

fn cfg(depth: usize, db: f64) -> PvgsConfig {
    PvgsConfig {
        depth,
        delta_beta: db,
        ..PvgsConfig::default()
    }
}

#[test]
fn evolve_zero_target_returns_mu0() {
    let h = ham_ising(2).unwrap();
    let ev = evolve(&h, &[0.0], &cfg(4, 0.01)).unwrap();
    assert_eq!(ev.samples.len(), 1);
    assert!(ev.trajectory.is_empty());
    assert_abs_diff_eq!(ev.samples[0].fidelity.unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn ising_fidelity_at_unit_beta() {
    let h = ham_ising(2).unwrap();
    let ev = evolve(&h, &[0.5, 1.0], &cfg(8, 0.01)).unwrap();
    let f = ev.samples[1].fidelity.unwrap();
    assert!(f >= 0.99, "fidelity {f}");
    assert_abs_diff_eq!(ev.trajectory.last().unwrap().beta, 1.0, epsilon = 1e-9);
    assert_eq!(ev.trajectory.len(), 100);
}

#[test]
fn step_halving_converges() {
    let h = ham_ising(2).unwrap();
    let f1 = evolve(&h, &[1.0], &cfg(8, 0.02)).unwrap().samples[0].fidelity.unwrap();
    let f2 = evolve(&h, &[1.0], &cfg(8, 0.01)).unwrap().samples[0].fidelity.unwrap();
    assert!((f1 - f2).abs() < 0.005, "{f1} vs {f2}");
}

#[test]
fn trajectory_invariants() {
    for h in [ham_ising(2).unwrap(), ham_ising(3).unwrap(), rescale(&ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap(), 0.1).unwrap()] {
        let ev = evolve(&h, &[0.5], &cfg(6, 0.01)).unwrap();
        let mut prev = expectation(&prepare_mu0(h.n_qubits()).unwrap(), &h).unwrap();
        for r in &ev.trajectory {
            assert!(r.residual_loss <= r.initial_loss + 1e-12);
            assert!(r.residual_loss >= -1e-12);
            assert!(r.energy <= prev + 1e-3, "energy rose from {prev} to {}", r.energy);
            prev = r.energy;
            let d = r.a_matrix.len();
            for i in 0..d {
                for j in 0..d {
                    assert!((r.a_matrix[i][j] - r.a_matrix[j][i]).abs() <= 1e-10);
                }
            }
            assert!(r.expressibility.unwrap().is_finite());
        }
    }
}

#[test]
fn evolve_rejects_bad_targets() {
    let h = ham_ising(2).unwrap();
    assert!(evolve(&h, &[1.0, 0.5], &cfg(2, 0.01)).is_err());
    assert!(evolve(&h, &[-0.1], &cfg(2, 0.01)).is_err());
    assert!(AnsatzLayout::hamiltonian_variational(&h, 0, LayoutKind::Grouped).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ansatz_states_are_normalized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap();
        let a = ansatz(&h, 5, LayoutKind::PerTerm, random_theta(&mut rng, 5));
        prop_assert!((a.state().unwrap().norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solved_step_does_not_raise_loss(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ham_ising(2).unwrap();
        let a = ansatz(&h, 4, LayoutKind::Grouped, random_theta(&mut rng, 4));
        let m = build_a_matrix(&a, AMode::Exact, 0).unwrap();
        let c = build_c_vector(&a, &h, 0.05, CMode::Exact, 0).unwrap().c;
        let x = solve_step(&m, &c, 1e-6).unwrap();
        // L(x) − L(0) = xᵀAx − 2Cᵀx.
        let change = (x.transpose() * &m * &x)[(0, 0)] - 2.0 * c.dot(&x);
        prop_assert!(change <= 1e-12);
    }
}
