use approx::assert_abs_diff_eq;

use thermoshadow::exactsim::exact_partition;
use thermoshadow::pauli::*;
use thermoshadow::pipeline::*;
use thermoshadow::shadows::product_mean_bound_check;

fn ising(n: usize) -> HamiltonianSpec {
    HamiltonianSpec::Ising {
        n,
        boundary: Boundary::Periodic,
    }
}

fn all_families(n: usize) -> Vec<HamiltonianSpec> {
    let mut v = vec![ising(n), HamiltonianSpec::Diagonal { n }];
    if n.is_multiple_of(2) && n >= 4 {
        v.push(HamiltonianSpec::Hubbard {
            n_a: 1,
            n_b: n / 2,
            t: 1.0,
            u: 2.0,
        });
    }
    v
}

#[test]
fn zero_beta_gives_dimension() {
    let r = estimate_partition(&RunConfig::exact(ising(3), 0.0, 1)).unwrap();
    assert_eq!(r.z_hat, 8.0);
    assert!(r.steps.is_empty());
}

#[test]
fn exact_mode_reproduces_partition() {
    let r = estimate_partition(&RunConfig::exact(ising(3), 2.0, 7)).unwrap();
    let z = exact_partition(&ham_ising(3).unwrap(), 2.0).unwrap();
    assert!(((r.z_hat - z) / z).abs() <= 1e-6);
    assert!(r.relative_error.unwrap() <= 1e-6);
    for n in [2, 4] {
        for spec in all_families(n) {
            for beta in [2.0, 3.0, 4.0] {
                let r = estimate_partition(&RunConfig::exact(spec.clone(), beta, 0)).unwrap();
                let z = exact_partition(&spec.build().unwrap(), beta).unwrap();
                assert!(((r.z_hat - z) / z).abs() <= 1e-8, "{spec:?} beta={beta}");
            }
        }
    }
}

#[test]
fn expansion_mode_is_close() {
    for spec in all_families(4) {
        let mut c = RunConfig::exact(spec.clone(), 2.0, 0);
        c.mean_mode = MeanMode::Expansion;
        let r = estimate_partition(&c).unwrap();
        let l = r.schedule.len() as f64;
        // Each factor carries at most eps4/E relative error from the expansion.
        let bound = 2.0 * l * c.eps4 / r.steps.iter().map(|s| s.ev.min(s.ew)).fold(f64::INFINITY, f64::min);
        assert!(r.relative_error.unwrap() <= bound.exp_m1(), "{spec:?}: {:?}", r.relative_error);
        assert!(r.steps.iter().all(|s| s.expansion_degree.is_some()));
    }
}

#[test]
fn shadow_mode_ledger_and_determinism() {
    let mut c = RunConfig::exact(ising(2), 1.0, 5);
    c.mean_mode = MeanMode::Shadow;
    c.shots = Some(2000);
    c.max_step = Some(1.0);
    let r = estimate_partition(&c).unwrap();
    let points = r.schedule.betas.len();
    assert_eq!(r.ledger.mean_values, 2000 * points);
    assert_eq!(r.ledger.total, r.ledger.schedule + r.ledger.gibbs + r.ledger.mean_values);
    assert!(r.z_hat > 0.0);
    assert!(r.relative_error.unwrap() < 0.5);
    let again = estimate_partition(&c).unwrap();
    assert_eq!(r.to_json().unwrap(), again.to_json().unwrap());
    c.seed = 6;
    assert_ne!(estimate_partition(&c).unwrap().z_hat, r.z_hat);
}

#[test]
fn first_register_shadows() {
    let mut c = RunConfig::exact(ising(3), 1.0, 2);
    c.mean_mode = MeanMode::Shadow;
    c.shots = Some(1000);
    c.register = Register::First;
    c.max_step = Some(1.0);
    let r = estimate_partition(&c).unwrap();
    assert!(r.relative_error.unwrap() < 0.5);
}

#[test]
fn bound_sized_budget() {
    let mut c = RunConfig::exact(ising(2), 0.5, 3);
    c.mean_mode = MeanMode::Shadow;
    c.eps3 = 0.5;
    c.delta3 = 0.5;
    let r = estimate_partition(&c).unwrap();
    let rel: Vec<f64> = r.schedule.certificates.iter().flat_map(|f| [1.0 / f, 1.0 / f]).collect();
    assert_eq!(r.shots_per_point, Some(product_mean_bound_check(&rel, 0.5, 0.5).unwrap()));
}

#[test]
fn variational_gibbs_states() {
    let mut c = RunConfig::exact(ising(2), 0.5, 4);
    c.mean_mode = MeanMode::Shadow;
    c.gibbs_mode = GibbsMode::Pvgs;
    c.shots = Some(500);
    let r = estimate_partition(&c).unwrap();
    for f in &r.gibbs_fidelity {
        assert!(f.unwrap() >= 0.99);
    }
}

#[test]
fn estimated_schedule_stage() {
    let mut c = RunConfig::exact(ising(2), 1.0, 8);
    c.schedule_mode = ScheduleMode::Shadow;
    c.schedule_samples = 200;
    let r = estimate_partition(&c).unwrap();
    assert!(r.ledger.schedule >= 400);
    assert_abs_diff_eq!(r.relative_error.unwrap(), 0.0, epsilon = 1e-8);
}

#[test]
fn config_validation() {
    let ok = r#"{"hamiltonian": {"family": "ising", "n": 3}, "beta": 1.0, "seed": 2}"#;
    let c = RunConfig::from_json(ok).unwrap();
    assert_eq!(c.c2, 15.0);
    assert_eq!(c.mean_mode, MeanMode::Exact);
    let no_seed = r#"{"hamiltonian": {"family": "ising", "n": 3}, "beta": 1.0}"#;
    assert!(matches!(RunConfig::from_json(no_seed), Err(thermoshadow::Error::Config(_))));
    let bad_eps = r#"{"hamiltonian": {"family": "diagonal", "n": 3}, "beta": 1.0, "seed": 1, "eps4": 1.5}"#;
    assert!(matches!(RunConfig::from_json(bad_eps), Err(thermoshadow::Error::Config(_))));
    let hub = r#"{"hamiltonian": {"family": "hubbard", "n_a": 1, "n_b": 2}, "beta": 1.0, "seed": 1, "mean_mode": "shadow", "locality": {"local": 2}}"#;
    let c = RunConfig::from_json(hub).unwrap();
    assert_eq!(c.hamiltonian.build().unwrap().n_qubits(), 4);
    let mut bad = RunConfig::exact(ising(2), -1.0, 0);
    assert!(estimate_partition(&bad).is_err());
    bad.beta = 1.0;
    bad.c2 = 1.0;
    assert!(estimate_partition(&bad).is_err());
}

#[test]
fn file_hamiltonian() {
    let dir = std::env::temp_dir().join(format!("pipeline-file-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("h.txt");
    std::fs::write(&path, ham_ising(3).unwrap().to_text()).unwrap();
    let r = estimate_partition(&RunConfig::exact(HamiltonianSpec::File { path }, 1.5, 0)).unwrap();
    let z = exact_partition(&ham_ising(3).unwrap(), 1.5).unwrap();
    assert!(((r.z_hat - z) / z).abs() <= 1e-8);
    std::fs::remove_dir_all(dir).ok();
}
