use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StudentT};

use thermoshadow::clifford::*;
use thermoshadow::exactsim::{expectation, spectrum, DenseLimits, StateVector};
use thermoshadow::pauli::{ham_ising, terms_to_matrix, PauliString, PauliSum, PauliTerm};
use thermoshadow::shadows::*;

fn all_paulis(n: usize) -> Vec<PauliString> {
    (0..1u64 << n)
        .flat_map(|x| (0..1u64 << n).map(move |z| (x, z)))
        .map(|(x, z)| PauliString::from_masks(n, x, z).unwrap())
        .collect()
}

fn shadow(psi: &StateVector, m: usize, seed: u64, locality: Locality) -> ShadowSet {
    let opts = ShadowOptions {
        locality,
        ..Default::default()
    };
    collect_shadow_with(psi, m, seed, &opts).unwrap()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

fn variance(v: &[f64]) -> f64 {
    let (_, se) = mean_and_se(v);
    se * se * v.len() as f64
}

#[test]
fn closed_form_trace_matches_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, loc) in [
        (2, Locality::Global),
        (2, Locality::Local(1)),
        (3, Locality::Local(2)),
        (3, Locality::Global),
    ] {
        let psi = StateVector::random(n, &mut rng).unwrap();
        let phi = StateVector::random(n, &mut rng).unwrap();
        let a = shadow(&psi, 100, 10, loc);
        let b = shadow(&phi, 100, 20, loc);
        for (s, t) in a.snapshots.iter().zip(&b.snapshots) {
            let x = InvertedSnapshot::new(s, loc).unwrap();
            let y = InvertedSnapshot::new(t, loc).unwrap();
            let dense = (x.to_dense().unwrap() * y.to_dense().unwrap()).trace();
            let closed = x.trace_product(&y).unwrap();
            assert!((dense.re - closed).abs() < 1e-10 && dense.im.abs() < 1e-10);
            assert!((x.trace_product(&x).unwrap() - (x.to_dense().unwrap().norm_squared())).abs() < 1e-9);
        }
    }
}

#[test]
fn dense_snapshot_is_inverted_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let psi = StateVector::random(2, &mut rng).unwrap();
    for s in &shadow(&psi, 50, 3, Locality::Global).snapshots {
        let rho = InvertedSnapshot::new(s, Locality::Global).unwrap().to_dense().unwrap();
        let ud = s.unitary.to_dense().unwrap();
        let v = ud.row(s.outcome as usize).adjoint();
        let expect = &v * v.adjoint() * Complex64::new(5.0, 0.0) - DMatrix::identity(4, 4);
        assert!((rho - expect).norm() < 1e-10);
    }
}

#[test]
fn pauli_values_match_dense_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n, loc) in [(2, Locality::Global), (2, Locality::Local(1)), (3, Locality::Local(2))] {
        let psi = StateVector::random(n, &mut rng).unwrap();
        for s in &shadow(&psi, 40, 4, loc).snapshots {
            let inv = InvertedSnapshot::new(s, loc).unwrap();
            let rho = inv.to_dense().unwrap();
            for p in all_paulis(n) {
                let pm = terms_to_matrix(n, &[PauliTerm::new(1.0, p)], 12).unwrap();
                let dense = (pm * &rho).trace();
                assert!((dense.re - inv.pauli_value(&p)).abs() < 1e-10, "{p}");
            }
        }
    }
}

#[test]
fn mean_snapshot_reconstructs_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let psi = StateVector::random(2, &mut rng).unwrap();
    let set = shadow(&psi, 100_000, 5, Locality::Global);
    let mut avg = DMatrix::<Complex64>::zeros(4, 4);
    for s in &set.snapshots {
        avg += InvertedSnapshot::new(s, Locality::Global).unwrap().to_dense().unwrap();
    }
    avg /= Complex64::new(set.len() as f64, 0.0);
    let a = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let target = &a * a.adjoint();
    assert!((avg - target).iter().all(|e| e.norm() < 0.02));
}

#[test]
fn identity_observable_is_exactly_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi = StateVector::random(3, &mut rng).unwrap();
    for loc in [Locality::Global, Locality::Local(1), Locality::Local(2)] {
        let set = shadow(&psi, 30, 6, loc);
        let id = PauliSum::identity(3).unwrap();
        assert!(observable_values(&set, &id).unwrap().iter().all(|v| *v == 1.0));
        assert_eq!(estimate_observable(&set, &id, MMConfig::new(30, 3).unwrap()).unwrap(), 1.0);
    }
}

#[test]
fn z_on_zero_state() {
    let psi = StateVector::zero(1).unwrap();
    let set = collect_shadow(&psi, 10_000, 7).unwrap();
    let z = PauliSum::from_terms(1, vec![PauliTerm::new(1.0, "Z".parse().unwrap())]).unwrap();
    let est = estimate_observable(&set, &z, MMConfig::new(10_000, 10).unwrap()).unwrap();
    assert!((est - 1.0).abs() < 0.05, "{est}");
}

#[test]
fn ising_ground_energy_from_shadows() {
    let h = ham_ising(3).unwrap();
    let spec = spectrum(&h, &DenseLimits::default()).unwrap();
    let imin = (0..spec.values.len())
        .min_by(|&a, &b| spec.values[a].total_cmp(&spec.values[b]))
        .unwrap();
    let ground = StateVector::new(3, spec.vector(imin)).unwrap();
    let set = collect_shadow(&ground, 10_000, 8).unwrap();
    let obs = PauliSum::from_hamiltonian(&h);
    let est = estimate_observable(&set, &obs, MMConfig::mean(10_000).unwrap()).unwrap();
    let exact = expectation(&ground, &h).unwrap();
    assert!((exact - spec.min()).abs() < 1e-10);
    assert!((est - exact).abs() < 0.1, "{est} vs {exact}");
}

#[test]
fn global_overlap_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let psi = StateVector::random(2, &mut rng).unwrap();
    let phi = StateVector::random(2, &mut rng).unwrap();
    let a = collect_shadow(&psi, 100_000, 10).unwrap();
    let b = collect_shadow(&phi, 100_000, 11).unwrap();
    let v = paired_overlap_values(&a, &b).unwrap();
    let (m, se) = mean_and_se(&v);
    let exact = psi.overlap(&phi).unwrap();
    assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
    assert!((overlap_global(&a, &b).unwrap() - m).abs() < 1e-12);
}

// Single-sample variance of the paired estimator is close to 4^n, so the
// tolerance scales with the measured standard error.
#[test]
fn identical_and_orthogonal_states_at_four_qubits() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let psi = StateVector::random(4, &mut rng).unwrap();
    let mut perp = StateVector::random(4, &mut rng).unwrap().amplitudes().to_vec();
    let c = thermoshadow::exactsim::inner(psi.amplitudes(), &perp);
    for (p, a) in perp.iter_mut().zip(psi.amplitudes()) {
        *p -= c * a;
    }
    let perp = StateVector::normalized(4, perp).unwrap();
    assert!(psi.overlap(&perp).unwrap() < 1e-20);
    for (phi, exact) in [(&psi, 1.0), (&perp, 0.0)] {
        let mut vals = Vec::new();
        for t in 0..20 {
            let a = collect_shadow(&psi, 1000, 100 + t).unwrap();
            let b = collect_shadow(phi, 1000, 200 + t).unwrap();
            vals.extend(paired_overlap_values(&a, &b).unwrap());
        }
        let (m, se) = mean_and_se(&vals);
        assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
    }
}

#[test]
fn local_with_one_block_equals_global() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let psi = StateVector::random(3, &mut rng).unwrap();
    let phi = StateVector::random(3, &mut rng).unwrap();
    let (ga, gb) = (collect_shadow(&psi, 200, 1).unwrap(), collect_shadow(&phi, 200, 2).unwrap());
    let (la, lb) = (shadow(&psi, 200, 1, Locality::Local(3)), shadow(&phi, 200, 2, Locality::Local(3)));
    assert_eq!(overlap_local(&la, &lb, 3).unwrap(), overlap_global(&ga, &gb).unwrap());
    assert_eq!(overlap_local(&ga, &gb, 3).unwrap(), overlap_global(&ga, &gb).unwrap());
    assert!(overlap_local(&la, &lb, 1).is_err());
    assert!(overlap_global(&la, &lb).is_err());
}

#[test]
fn local_overlap_on_product_state() {
    let psi = StateVector::zero(2).unwrap();
    let a = shadow(&psi, 10_000, 14, Locality::Local(1));
    let b = shadow(&psi, 10_000, 15, Locality::Local(1));
    let v = paired_overlap_values(&a, &b).unwrap();
    let (m, se) = mean_and_se(&v);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} (se {se})");
    assert!((overlap_local(&a, &b, 1).unwrap() - m).abs() < 1e-12);
}

#[test]
fn local_variance_exceeds_global() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for n in [2, 3] {
        let psi = StateVector::random(n, &mut rng).unwrap();
        let phi = StateVector::random(n, &mut rng).unwrap();
        let g = paired_overlap_values(
            &collect_shadow(&psi, 20_000, 1).unwrap(),
            &collect_shadow(&phi, 20_000, 2).unwrap(),
        )
        .unwrap();
        let l = paired_overlap_values(
            &shadow(&psi, 20_000, 3, Locality::Local(1)),
            &shadow(&phi, 20_000, 4, Locality::Local(1)),
        )
        .unwrap();
        assert!(variance(&l) > variance(&g), "n={n}: {} vs {}", variance(&l), variance(&g));
    }
}

#[test]
fn all_pairs_variant_matches_exact_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let psi = StateVector::random(2, &mut rng).unwrap();
    let phi = StateVector::random(2, &mut rng).unwrap();
    let a = collect_shadow(&psi, 300, 1).unwrap();
    let b = collect_shadow(&phi, 400, 2).unwrap();
    let est = overlap_estimate(&a, &b, OverlapOptions { all_pairs: true }).unwrap();
    let exact = psi.overlap(&phi).unwrap();
    assert!((est - exact).abs() < 0.25, "{est} vs {exact}");
    assert!(paired_overlap_values(&a, &b).is_err());
}

#[test]
fn mismatched_sets_are_rejected() {
    let psi2 = StateVector::zero(2).unwrap();
    let psi3 = StateVector::zero(3).unwrap();
    let a = collect_shadow(&psi2, 10, 1).unwrap();
    let b = collect_shadow(&psi3, 10, 1).unwrap();
    assert!(overlap_global(&a, &b).is_err());
    let obs = PauliSum::identity(3).unwrap();
    assert!(observable_values(&a, &obs).is_err());
    assert!(estimate_observable(&a, &PauliSum::identity(2).unwrap(), MMConfig::mean(11).unwrap()).is_err());
}

#[test]
fn first_register_observable_on_doubled_shadow() {
    // Reduced state of a Bell pair is maximally mixed, so ⟨Z ⊗ I⟩ = 0 and ⟨ZZ⟩ = 1.
    let bell = StateVector::normalized(
        2,
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    )
    .unwrap();
    let set = collect_shadow(&bell, 20_000, 3).unwrap();
    let z1 = PauliSum::from_terms(1, vec![PauliTerm::new(1.0, "Z".parse().unwrap())]).unwrap();
    let zz = PauliSum::from_terms(2, vec![PauliTerm::new(1.0, "ZZ".parse().unwrap())]).unwrap();
    let e1 = estimate_observable(&set, &z1, MMConfig::mean(20_000).unwrap()).unwrap();
    let e2 = estimate_observable(&set, &zz, MMConfig::mean(20_000).unwrap()).unwrap();
    assert!(e1.abs() < 0.05 && (e2 - 1.0).abs() < 0.05, "{e1} {e2}");
}

#[test]
fn median_of_means_beats_mean_on_heavy_tails() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let t = StudentT::new(1.1).unwrap();
    let mut wins = 0;
    for _ in 0..100 {
        let v: Vec<f64> = (0..1000).map(|_| t.sample(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let mm = median_of_means(&v, 25).unwrap();
        if mm.abs() < mean.abs() {
            wins += 1;
        }
    }
    assert!(wins >= 70, "{wins}");
}

#[test]
fn product_bound_gives_coverage() {
    // Exponential factors have relative second moment E[X²]/E[X]² = 2.
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (eps, delta) = (0.2, 0.2);
    let rates = [1.0, 0.5, 3.0];
    let m = product_mean_bound_check(&[2.0; 3], eps, delta).unwrap();
    assert_eq!(m, 1500);
    let truth: f64 = rates.iter().map(|r| 1.0 / r).product();
    let mut hits = 0;
    for _ in 0..500 {
        let est: f64 = rates
            .iter()
            .map(|&r| {
                let d = Exp::new(r).unwrap();
                (0..m).map(|_| d.sample(&mut rng)).sum::<f64>() / m as f64
            })
            .product();
        if (est / truth - 1.0).abs() <= eps {
            hits += 1;
        }
    }
    assert!(hits as f64 >= (1.0 - delta) * 500.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mm_with_one_group_is_the_mean(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert_eq!(median_of_means(&v, 1).unwrap(), mean);
    }

    #[test]
    fn mm_lies_within_sample_range(v in prop::collection::vec(-1e3f64..1e3, 1..200), k in 1usize..20) {
        let k = k.min(v.len());
        let mm = median_of_means(&v, k).unwrap();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mm >= lo - 1e-9 && mm <= hi + 1e-9);
    }

    #[test]
    fn trace_product_is_symmetric(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = StateVector::random(n, &mut rng).unwrap();
        let a = collect_shadow(&psi, 4, seed).unwrap();
        let s: Vec<_> = a.snapshots.iter().map(|s| InvertedSnapshot::new(s, Locality::Global).unwrap()).collect();
        for x in &s {
            for y in &s {
                prop_assert_eq!(x.trace_product(y).unwrap(), y.trace_product(x).unwrap());
            }
            let d = (1u64 << n) as f64;
            prop_assert!((x.trace_product(x).unwrap() - ((d + 1.0) * (d + 1.0) - 2.0 * (d + 1.0) + d)).abs() < 1e-9);
        }
    }
}
