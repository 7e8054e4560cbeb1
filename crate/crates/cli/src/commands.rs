//! Subcommand implementations.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thermoshadow::clifford::{collect_shadow, derive_seed, random_clifford, CliffordElement};
use thermoshadow::exactsim::*;
use thermoshadow::mvcs::{build_expansion, chebyshev_operator, DEFAULT_TERM_CAP};
use thermoshadow::pauli::*;
use thermoshadow::pipeline::{estimate_partition, HamiltonianSpec, RunConfig};
use thermoshadow::pvgs::{evolve, AnsatzLayout, AnsatzState, LayoutKind, PvgsConfig};
use thermoshadow::schedule::{csbs, exact_overlap, overlap_f, GibbsSource, OverlapMode, ScheduleConfig};
use thermoshadow::shadows::{estimate_observable, MMConfig};
use thermoshadow::{Error, Result};

use crate::args::*;
use crate::config::*;
use crate::output::{CommandReport, OutDir};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Partition(a) => partition(&a),
        Command::Schedule(a) => schedule(&a),
        Command::Gibbs(a) => gibbs(&a),
        Command::Overlap(a) => overlap(&a),
        Command::Expansion(a) => expansion(&a),
        Command::Validate(a) => validate(&a),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn partition(args: &RunArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let out = OutDir::create(&args.common.out)?;
    let report = estimate_partition(&cfg)?;
    out.write_text("report.json", &report.to_json()?)?;
    let rows: Vec<Vec<String>> = report
        .steps
        .iter()
        .map(|s| {
            vec![
                s.beta_index.to_string(),
                s.beta.to_string(),
                s.ev.to_string(),
                s.ew.to_string(),
                opt(s.ev_exact),
                opt(s.ew_exact),
            ]
        })
        .collect();
    out.write_records("steps.csv", &["beta_index", "beta", "EV", "EW", "EV_exact", "EW_exact"], &rows)?;
    println!(
        "z_hat={:.10e} z_exact={} relative_error={} steps={} snapshots={}",
        report.z_hat,
        opt(report.z_exact),
        opt(report.relative_error),
        report.schedule.len(),
        report.ledger.total
    );
    Ok(())
}

/// Rescaled Hamiltonian and the factor mapping β to the rescaled axis.
fn rescaled(cfg: &RunConfig) -> Result<(Hamiltonian, f64)> {
    let h0 = cfg.hamiltonian.build()?;
    let h = rescale(&h0, cfg.window_delta)?;
    let scale = h.scale() / h0.scale();
    Ok((h, scale))
}

fn schedule(args: &RunArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let out = OutDir::create(&args.common.out)?;
    let (h, scale) = rescaled(&cfg)?;
    let s = csbs(&h, cfg.beta * scale, cfg.c2, &cfg.schedule_config())?;
    out.write_text("schedule.json", &s.to_json()?)?;
    let rows: Vec<Vec<String>> = s
        .betas
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let cert = if i == 0 { String::new() } else { s.certificates[i - 1].to_string() };
            vec![i.to_string(), b.to_string(), (b / scale).to_string(), cert]
        })
        .collect();
    out.write_records("schedule.csv", &["beta_index", "beta", "beta_original", "certificate"], &rows)?;
    let summary = json!({
        "scale": scale,
        "length": s.len(),
        "predicate_calls": s.predicate_calls,
        "snapshots": s.snapshots,
    });
    out.write_json("report.json", &CommandReport { command: "schedule", config: &cfg, summary })?;
    println!("length={} predicate_calls={} snapshots={}", s.len(), s.predicate_calls, s.snapshots);
    Ok(())
}

fn gibbs(args: &RunArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let out = OutDir::create(&args.common.out)?;
    let (h, scale) = rescaled(&cfg)?;
    let pvgs = PvgsConfig {
        depth: cfg.depth,
        delta_beta: cfg.delta_beta,
        seed: cfg.seed,
        track_fidelity: true,
        ..PvgsConfig::default()
    };
    let ev = evolve(&h, &[cfg.beta * scale], &pvgs)?;
    let rows: Vec<Vec<String>> = ev
        .trajectory
        .iter()
        .map(|r| {
            let theta: Vec<String> = r.theta.iter().map(|t| t.to_string()).collect();
            vec![
                r.beta.to_string(),
                theta.join(";"),
                r.residual_loss.to_string(),
                opt(r.fidelity),
                r.energy.to_string(),
            ]
        })
        .collect();
    out.write_records("trajectory.csv", &["beta", "theta", "residual_loss", "fidelity", "energy"], &rows)?;
    let last = &ev.samples[0];
    let summary = json!({
        "scale": scale,
        "beta_rescaled": last.beta,
        "steps": ev.trajectory.len(),
        "fidelity": last.fidelity,
        "energy": last.energy,
        "theta": last.ansatz.theta,
    });
    out.write_json("report.json", &CommandReport { command: "gibbs", config: &cfg, summary })?;
    println!("steps={} fidelity={} energy={}", ev.trajectory.len(), opt(last.fidelity), last.energy);
    Ok(())
}

#[derive(Serialize)]
struct OverlapRow {
    pair: usize,
    beta_i: f64,
    beta_j: f64,
    exact: f64,
    estimate: f64,
    abs_error: f64,
}

fn overlap(args: &OverlapArgs) -> Result<()> {
    let cfg: OverlapConfig = merged(&args.common, args)?;
    cfg.validate()?;
    let spec: HamiltonianSpec = serde_json::from_value(json!({ "family": cfg.family, "n": cfg.n }))
        .map_err(|e| Error::Config(format!("overlap family: {e}")))?;
    let h = spec.build()?;
    let out = OutDir::create(&args.common.out)?;
    let spectrum = spectrum(&h, &DenseLimits::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.pairs);
    for pair in 0..cfg.pairs {
        let a: f64 = rng.gen_range(0.0..=cfg.beta_max);
        let b: f64 = rng.gen_range(0.0..=cfg.beta_max);
        let (beta_i, beta_j) = (a.min(b), a.max(b));
        let sc = ScheduleConfig {
            overlap: OverlapMode::Shadow {
                samples: cfg.shots,
                all_pairs: cfg.all_pairs,
                gibbs: GibbsSource::Oracle,
            },
            seed: derive_seed(cfg.seed, pair as u64),
            ..ScheduleConfig::default()
        };
        let estimate = overlap_f(&h, beta_i, beta_j, &sc)?;
        let exact = exact_overlap(&spectrum, beta_i, beta_j);
        rows.push(OverlapRow {
            pair,
            beta_i,
            beta_j,
            exact,
            estimate,
            abs_error: (estimate - exact).abs(),
        });
    }
    out.write_csv("overlap.csv", &rows)?;
    let mean = rows.iter().map(|r| r.abs_error).sum::<f64>() / rows.len() as f64;
    let summary = json!({ "mean_abs_error": mean, "snapshots": 2 * cfg.shots * cfg.pairs });
    out.write_json("report.json", &CommandReport { command: "overlap", config: &cfg, summary })?;
    println!("pairs={} shots={} mean_abs_error={mean}", cfg.pairs, cfg.shots);
    Ok(())
}

fn expansion(args: &ExpansionArgs) -> Result<()> {
    let cfg: ExpansionConfig = merged(&args.common, args)?;
    let out = OutDir::create(&args.common.out)?;
    let e = build_expansion(cfg.d, cfg.delta, cfg.eps)?;
    out.write_text("expansion.json", &e.to_json()?)?;
    let rows: Vec<Vec<String>> = e.weights.iter().map(|(k, w)| vec![k.to_string(), w.to_string()]).collect();
    out.write_records("expansion.csv", &["degree", "weight"], &rows)?;
    let summary = json!({ "degree": e.degree(), "certificate": e.certificate, "provenance": e.provenance });
    out.write_json("report.json", &CommandReport { command: "expansion", config: &cfg, summary })?;
    println!("degree={} certificate={:.3e}", e.degree(), e.certificate);
    Ok(())
}

/// One oracle comparison.
#[derive(Clone, Debug, Serialize)]
struct Record {
    quantity: String,
    exact: f64,
    estimated: f64,
    error: f64,
    tolerance: f64,
    passed: bool,
}

impl Record {
    fn new(quantity: impl Into<String>, exact: f64, estimated: f64, error: f64, tolerance: f64) -> Self {
        Self {
            quantity: quantity.into(),
            exact,
            estimated,
            error,
            tolerance,
            passed: error <= tolerance,
        }
    }

    fn abs(quantity: impl Into<String>, exact: f64, estimated: f64, tolerance: f64) -> Self {
        Self::new(quantity, exact, estimated, (exact - estimated).abs(), tolerance)
    }
}

type Check = fn(u64) -> Result<Vec<Record>>;

fn validate(args: &ValidateArgs) -> Result<()> {
    let cfg: ValidateConfig = merged(&args.common, args)?;
    let out = OutDir::create(&args.common.out)?;
    let suites: [(&str, Check); 7] = [
        ("partition_identity", check_partition),
        ("gibbs_normalization", check_gibbs),
        ("overlap_identity", check_overlap),
        ("expansion_certificate", check_expansion),
        ("pvgs_derivatives", check_derivatives),
        ("clifford_group", check_clifford),
        ("shadow_channel", check_channel),
    ];
    let mut records = Vec::new();
    let mut failure = None;
    for (name, check) in suites {
        let recs = check(cfg.seed)?;
        let ok = recs.iter().all(|r| r.passed);
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        records.extend(recs);
        if !ok {
            failure = Some(name);
            break;
        }
    }
    out.write_json("validate.json", &records)?;
    out.write_csv("validate.csv", &records)?;
    let summary = json!({ "records": records.len(), "failed_suite": failure });
    out.write_json("report.json", &CommandReport { command: "validate", config: &cfg, summary })?;
    match failure {
        Some(name) => Err(Error::Numerical(format!("validation suite {name} failed"))),
        None => Ok(()),
    }
}

fn small_families() -> Result<Vec<(&'static str, Hamiltonian)>> {
    Ok(vec![
        ("ising3", ham_ising(3)?),
        ("diagonal3", ham_diagonal(3)?),
        ("hubbard1x2", ham_hubbard_jw(1, 2, 1.0, 2.0)?),
    ])
}

fn check_partition(seed: u64) -> Result<Vec<Record>> {
    let specs = [
        HamiltonianSpec::Ising {
            n: 3,
            boundary: Boundary::Periodic,
        },
        HamiltonianSpec::Diagonal { n: 3 },
        HamiltonianSpec::Hubbard {
            n_a: 1,
            n_b: 2,
            t: 1.0,
            u: 2.0,
        },
    ];
    let mut out = Vec::new();
    for spec in specs {
        for beta in [2.0, 4.0] {
            let r = estimate_partition(&RunConfig::exact(spec.clone(), beta, seed))?;
            let z = exact_partition(&spec.build()?, beta)?;
            let name = format!("Z {spec:?} beta={beta}");
            out.push(Record::new(name, z, r.z_hat, ((r.z_hat - z) / z).abs(), 1e-8));
        }
    }
    Ok(out)
}

fn check_gibbs(_seed: u64) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (name, h) in small_families()? {
        let g = exact_gibbs(&h, 1.5)?;
        let z = exact_partition(&h, 1.5)?;
        out.push(Record::new(format!("z_value {name}"), z, g.z_value, ((g.z_value - z) / z).abs(), 1e-10));
        out.push(Record::abs(format!("norm {name}"), 1.0, g.state.norm_sqr(), 1e-10));
    }
    Ok(out)
}

fn check_overlap(_seed: u64) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (name, h) in small_families()? {
        let spec = spectrum(&h, &DenseLimits::default())?;
        let (a, b) = (0.4, 1.9);
        let direct = gibbs_from_spectrum(&spec, a)?.state.overlap(&gibbs_from_spectrum(&spec, b)?.state)?;
        out.push(Record::abs(format!("overlap {name}"), exact_overlap(&spec, a, b), direct, 1e-10));
    }
    Ok(out)
}

fn check_expansion(_seed: u64) -> Result<Vec<Record>> {
    let h = rescale(&ham_ising(3)?, 0.2)?;
    let spec = spectrum(&h, &DenseLimits::default())?;
    let mut out = Vec::new();
    for d in [0.25, 0.5, 1.0, 2.0] {
        let e = build_expansion(d, 0.2, 1e-3)?;
        out.push(Record::new(format!("scalar d={d}"), 0.0, e.max_deviation(), e.max_deviation(), 1e-3));
        // p(H) is diagonal in the eigenbasis, so the spectral-norm deviation is
        // the largest eigenvector residual.
        let op = chebyshev_operator(&h, &e.weights, DEFAULT_TERM_CAP)?;
        let mut worst = 0.0f64;
        for (x, lambda) in spec.values.iter().enumerate() {
            let v = spec.vector(x);
            let pv = apply_terms(&v, op.terms());
            let target = (-d * lambda).exp();
            let r: f64 = pv.iter().zip(&v).map(|(p, v)| (p - v * target).norm_sqr()).sum();
            worst = worst.max(r.sqrt());
        }
        out.push(Record::new(format!("operator d={d}"), 0.0, worst, worst, 1e-3));
    }
    Ok(out)
}

fn check_derivatives(seed: u64) -> Result<Vec<Record>> {
    let h = ham_ising(2)?;
    let layout = Arc::new(AnsatzLayout::hamiltonian_variational(&h, 4, LayoutKind::Grouped)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..layout.depth()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = AnsatzState::new(layout, theta)?;
    let step = 1e-5;
    let mut out = Vec::new();
    for m in 0..a.theta.len() {
        let mut plus = a.clone();
        plus.theta[m] += step;
        let mut minus = a.clone();
        minus.theta[m] -= step;
        let (p, q) = (plus.state()?, minus.state()?);
        let fd: Vec<Complex64> = p
            .amplitudes()
            .iter()
            .zip(q.amplitudes())
            .map(|(x, y)| (x - y) / (2.0 * step))
            .collect();
        let d = a.derivative_state(m)?;
        let err = fd.iter().zip(&d).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        out.push(Record::new(format!("derivative m={m}"), 0.0, err, err, 1e-4));
    }
    Ok(out)
}

fn check_clifford(seed: u64) -> Result<Vec<Record>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0usize;
    let trials = 200;
    for i in 0..trials {
        let n = 1 + i % 3;
        let u = random_clifford(n, &mut rng)?;
        let id: CliffordElement = u.compose(&u.inverse())?;
        if !u.is_symplectic() || id != CliffordElement::identity(n)? {
            bad += 1;
        }
    }
    Ok(vec![Record::new("clifford symplectic and invertible", 0.0, bad as f64, bad as f64, 0.0)])
}

fn check_channel(seed: u64) -> Result<Vec<Record>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = StateVector::random(1, &mut rng)?;
    let m = 20_000;
    let shadow = collect_shadow(&psi, m, derive_seed(seed, 7))?;
    let mut out = Vec::new();
    for letter in [Letter::X, Letter::Y, Letter::Z] {
        let p = PauliString::single(1, 0, letter)?;
        let obs = PauliSum::from_terms(1, vec![PauliTerm::new(1.0, p)])?;
        let est = estimate_observable(&shadow, &obs, MMConfig::mean(m)?)?;
        let exact = pauli_expectation(psi.amplitudes(), &p).re;
        // Single-snapshot variance is at most 3, so 0.06 is over five standard errors.
        out.push(Record::abs(format!("shadow <{letter:?}>"), exact, est, 0.06));
    }
    Ok(out)
}
