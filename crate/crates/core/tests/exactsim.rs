use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoshadow::exactsim::*;
use thermoshadow::pauli::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Partition function from an independent dense eigensolve.
fn z_oracle(h: &Hamiltonian, beta: f64) -> f64 {
    to_matrix(h)
        .unwrap()
        .symmetric_eigenvalues()
        .iter()
        .map(|l| (-beta * l).exp())
        .sum()
}

#[test]
fn partition_examples() {
    for h in [ham_ising(3).unwrap(), ham_diagonal(4).unwrap()] {
        assert_abs_diff_eq!(exact_partition(&h, 0.0).unwrap(), (1u64 << h.n_qubits()) as f64, epsilon = 1e-9);
    }
    let z = Hamiltonian::new(1, vec![PauliTerm::new(1.0, "Z".parse().unwrap())]).unwrap();
    assert_abs_diff_eq!(exact_partition(&z, 1.0).unwrap(), 2.0 * 1f64.cosh(), epsilon = 1e-12);
    let d3 = ham_diagonal(3).unwrap();
    assert_abs_diff_eq!(exact_partition(&d3, 2.0).unwrap(), z_oracle(&d3, 2.0), epsilon = 1e-10);
    for h in [ham_ising(4).unwrap(), ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap()] {
        assert_abs_diff_eq!(exact_partition(&h, 0.7).unwrap(), z_oracle(&h, 0.7), epsilon = 1e-9);
    }
    assert!(exact_partition(&d3, -1.0).is_err());
}

#[test]
fn partition_monotone_and_log_convex() {
    let diag = ham_diagonal(4).unwrap();
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
    let zd: Vec<f64> = grid.iter().map(|b| exact_partition(&diag, *b).unwrap()).collect();
    assert!(zd.windows(2).all(|w| w[1] < w[0]));
    for h in [ham_ising(3).unwrap(), ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap(), diag] {
        let lz: Vec<f64> = grid.iter().map(|b| exact_partition(&h, *b).unwrap().ln()).collect();
        for w in lz.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-10);
        }
    }
}

#[test]
fn gibbs_at_zero_is_maximally_entangled() {
    let h = ham_diagonal(3).unwrap();
    let g = exact_gibbs(&h, 0.0).unwrap();
    let a = g.state.amplitudes();
    let r = 1.0 / 8f64.sqrt();
    for i in 0..8 {
        for j in 0..8 {
            let expect = if i == j { r } else { 0.0 };
            assert_abs_diff_eq!(a[i + 8 * j].re, expect, epsilon = 1e-12);
        }
    }
    assert_abs_diff_eq!(g.state.norm_sqr(), 1.0, epsilon = 1e-12);
}

#[test]
fn gibbs_reduced_state_is_thermal() {
    let h = ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap();
    let beta = 0.8;
    let g = exact_gibbs(&h, beta).unwrap();
    let dim = 16;
    let psi = DMatrix::from_column_slice(dim, dim, g.state.amplitudes());
    let rho = &psi * psi.adjoint();
    let m = to_matrix(&h).unwrap();
    let eig = m.clone().symmetric_eigen();
    let mut thermal = DMatrix::<Complex64>::zeros(dim, dim);
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        thermal += v * v.adjoint() * c((-beta * l).exp());
    }
    thermal /= c(g.z_value);
    assert!((rho - thermal).iter().all(|e| e.norm() < 1e-10));
    assert_abs_diff_eq!(g.z_value, exact_partition(&h, beta).unwrap(), epsilon = 1e-10);
}

#[test]
fn gibbs_overlap_identity() {
    for h in [ham_ising(2).unwrap(), ham_ising(3).unwrap(), ham_diagonal(3).unwrap()] {
        for (b1, b2) in [(0.0, 0.5), (0.3, 1.7), (1.0, 2.0)] {
            let g1 = exact_gibbs(&h, b1).unwrap();
            let g2 = exact_gibbs(&h, b2).unwrap();
            let lhs = g1.state.overlap(&g2.state).unwrap();
            let zm = z_oracle(&h, 0.5 * (b1 + b2));
            let rhs = zm * zm / (z_oracle(&h, b1) * z_oracle(&h, b2));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }
}

#[test]
fn circuits_and_expectations() {
    let s = apply_circuit(&StateVector::zero(1).unwrap(), &[Gate::H(0)]).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert_abs_diff_eq!(s.amplitudes()[1].re, r, epsilon = 1e-12);
    let x2 = apply_circuit(&StateVector::zero(2).unwrap(), &[Gate::X(1), Gate::X(1)]).unwrap();
    assert_abs_diff_eq!(x2.amplitudes()[0].re, 1.0, epsilon = 1e-12);
    assert!(apply_circuit(&StateVector::zero(2).unwrap(), &[Gate::H(2)]).is_err());
    let z = Hamiltonian::new(1, vec![PauliTerm::new(1.0, "Z".parse().unwrap())]).unwrap();
    assert_abs_diff_eq!(expectation(&StateVector::zero(1).unwrap(), &z).unwrap(), 1.0, epsilon = 1e-12);
    assert!(expectation(&StateVector::zero(1).unwrap(), &ham_ising(2).unwrap()).is_err());
}

#[test]
fn maximally_mixed_expectation_is_mean_eigenvalue() {
    let h = ham_hubbard_jw(1, 2, 1.0, 2.0).unwrap();
    let g = exact_gibbs(&h, 0.0).unwrap();
    let eig = to_matrix(&h).unwrap().symmetric_eigenvalues();
    let mean = eig.iter().sum::<f64>() / eig.len() as f64;
    assert_abs_diff_eq!(expectation(&g.state, &h).unwrap(), mean, epsilon = 1e-10);
}

#[test]
fn low_temperature_energy_approaches_ground() {
    let h = ham_ising(2).unwrap();
    let g = exact_gibbs(&h, 50.0).unwrap();
    let ground = to_matrix(&h).unwrap().symmetric_eigenvalues().min();
    assert_abs_diff_eq!(expectation(&g.state, &h).unwrap(), ground, epsilon = 1e-6);
}

#[test]
fn dense_limits_are_enforced() {
    let h = ham_ising(11).unwrap();
    assert!(matches!(exact_gibbs(&h, 1.0), Err(thermoshadow::Error::Resource(_))));
    let big = ham_ising(13).unwrap();
    assert!(matches!(to_matrix(&big), Err(thermoshadow::Error::Resource(_))));
    assert!(exact_partition(&ham_diagonal(13).unwrap(), 1.0).is_err());
    assert!(exact_partition(&ham_diagonal(12).unwrap(), 1.0).is_ok());
}

fn random_circuit(n: usize, rng: &mut ChaCha8Rng, len: usize) -> Vec<Gate> {
    (0..len)
        .map(|_| {
            let q = rng.gen_range(0..n);
            let r = (q + rng.gen_range(1..n)) % n;
            let a: f64 = rng.gen_range(-3.0..3.0);
            match rng.gen_range(0..10) {
                0 => Gate::H(q),
                1 => Gate::S(q),
                2 => Gate::Rx(q, a),
                3 => Gate::Ry(q, a),
                4 => Gate::Rz(q, a),
                5 => Gate::Cnot { control: q, target: r },
                6 => Gate::Cz(q, r),
                7 => Gate::Swap(q, r),
                8 => Gate::Y(q),
                _ => Gate::PauliRotation {
                    string: PauliString::from_masks(n, rng.gen_range(0..1 << n), rng.gen_range(0..1 << n)).unwrap(),
                    angle: a,
                },
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_circuits_preserve_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = StateVector::random(3, &mut rng).unwrap();
        let circ = random_circuit(3, &mut rng, 30);
        let out = apply_circuit(&psi, &circ).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expectation_lies_in_spectrum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ham_ising(3).unwrap();
        let psi = StateVector::random(3, &mut rng).unwrap();
        let e = expectation(&psi, &h).unwrap();
        let spec = spectrum(&h, &DenseLimits::default()).unwrap();
        prop_assert!(e >= spec.min() - 1e-10 && e <= spec.max() + 1e-10);
    }

    #[test]
    fn pauli_rotation_matches_dense_exponential(seed in any::<u64>(), angle in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = PauliString::from_masks(2, rng.gen_range(0..4), rng.gen_range(0..4)).unwrap();
        let psi = StateVector::random(2, &mut rng).unwrap();
        let out = apply_circuit(&psi, &[Gate::PauliRotation { string: p, angle }]).unwrap();
        let pm = terms_to_matrix(2, &[PauliTerm::new(1.0, p)], 4).unwrap();
        // exp(−iθP) = cos θ I − i sin θ P.
        let u = DMatrix::<Complex64>::identity(4, 4) * c(angle.cos()) - pm * Complex64::new(0.0, angle.sin());
        let expect = u * nalgebra::DVector::from_column_slice(psi.amplitudes());
        for (a, b) in out.amplitudes().iter().zip(expect.iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
