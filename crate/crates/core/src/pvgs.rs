//! Projected variational Gibbs sampling.
//!
//! The trial state lives on a doubled register and starts from the maximally
//! entangled state. Each Hamiltonian term `c·P` with anchor qubit `q` (its first
//! non-identity site) becomes a generator `G = −i·ω·(P'' ⊗ R_q)` where `R_q`
//! anticommutes with `P` at `q` and `P·R_q = ω·P''`. On the maximally entangled
//! state `G` acts like `P ⊗ I`, so the first-register reduced state can follow
//! imaginary time. A layer applies `Π_k exp(−iθ_d c_k G_k)` over a group of terms.
//!
//! Each step solves `(A + λI)δθ = C` with `A_nm = Re⟨∂_nφ|∂_mφ⟩` and
//! `C_m = (1/√E − 1)Re⟨∂_mφ|φ⟩ − (τ/√E)Re⟨∂_mφ|H|φ⟩`, `τ = δβ/2`,
//! `E = 1 − 2τ⟨φ|H|φ⟩`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::clifford::{collect_shadow_with, derive_seed, Locality, ShadowOptions};
use crate::error::{Error, Result};
use crate::exactsim::{
    apply_pauli_rotation, apply_terms, gibbs_from_spectrum, inner, spectrum, DenseLimits,
    Spectrum, StateVector,
};
use crate::pauli::{pauli_multiply, Hamiltonian, Letter, PauliString, PauliSum, PauliTerm};
use crate::shadows::{estimate_observable, MMConfig};

/// One Pauli-rotation factor `exp(−iθ·weight·string)` of a layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub string: PauliString,
    pub weight: f64,
}

/// How Hamiltonian terms are grouped into layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    /// Alternate the diagonal and off-diagonal term groups, one parameter per layer.
    #[default]
    Grouped,
    /// One parameter per term per repetition.
    PerTerm,
}

/// Layer structure of the ansatz on the doubled register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzLayout {
    pub n_qubits: usize,
    pub layers: Vec<Vec<Factor>>,
}

/// Lifted generator for a term on `n` qubits; `None` for the identity.
pub fn lifted_generator(term: &PauliTerm, n: usize) -> Result<Option<Factor>> {
    let p = term.string;
    if p.is_identity() {
        return Ok(None);
    }
    let q = p.support().trailing_zeros() as usize;
    let r_letter = match p.letter(q) {
        Letter::X => Letter::Z,
        _ => Letter::X,
    };
    let r = PauliString::single(n, q, r_letter)?;
    let (omega, pr) = pauli_multiply(&p, &r)?;
    // −i·ω is real because P and R anticommute at q.
    let coef = (Complex64::new(0.0, -1.0) * omega.to_complex()).re;
    let second = r.embed(2 * n, n)?;
    let first = pr.embed(2 * n, 0)?;
    let string = PauliString::from_masks(2 * n, first.x_mask() | second.x_mask(), first.z_mask() | second.z_mask())?;
    Ok(Some(Factor {
        string,
        weight: coef * term.coefficient,
    }))
}

impl AnsatzLayout {
    /// Hamiltonian-variational layout with `depth` parameters.
    pub fn hamiltonian_variational(h: &Hamiltonian, depth: usize, kind: LayoutKind) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Input("ansatz depth must be >= 1".into()));
        }
        let n = h.n_qubits();
        if 2 * n > 64 {
            return Err(Error::Input("doubled register exceeds 64 qubits".into()));
        }
        let mut diag = Vec::new();
        let mut off = Vec::new();
        for t in h.terms() {
            if let Some(f) = lifted_generator(t, n)? {
                if t.string.is_diagonal() {
                    diag.push(f);
                } else {
                    off.push(f);
                }
            }
        }
        let layers = match kind {
            LayoutKind::Grouped => {
                let groups: Vec<Vec<Factor>> =
                    [diag, off].into_iter().filter(|g| !g.is_empty()).collect();
                if groups.is_empty() {
                    return Err(Error::Input("Hamiltonian has only identity terms".into()));
                }
                (0..depth).map(|d| groups[d % groups.len()].clone()).collect()
            }
            LayoutKind::PerTerm => {
                let all: Vec<Factor> = diag.into_iter().chain(off).collect();
                if all.is_empty() {
                    return Err(Error::Input("Hamiltonian has only identity terms".into()));
                }
                (0..depth).map(|d| vec![all[d % all.len()].clone()]).collect()
            }
        };
        Ok(Self {
            n_qubits: 2 * n,
            layers,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// Maximally entangled state `2^{−n/2} Σ_i |i⟩|i⟩`.
pub fn prepare_mu0(n: usize) -> Result<StateVector> {
    DenseLimits::default().check_doubled(n)?;
    let dim = 1usize << n;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim * dim];
    let r = (dim as f64).sqrt().recip();
    for i in 0..dim {
        amps[i + dim * i] = Complex64::new(r, 0.0);
    }
    StateVector::new(2 * n, amps)
}

/// Parameters plus layout.
#[derive(Clone, Debug)]
pub struct AnsatzState {
    pub theta: Vec<f64>,
    pub layout: Arc<AnsatzLayout>,
}

impl AnsatzState {
    pub fn new(layout: Arc<AnsatzLayout>, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != layout.depth() {
            return Err(Error::Input(format!(
                "{} parameters for a depth-{} layout",
                theta.len(),
                layout.depth()
            )));
        }
        Ok(Self { theta, layout })
    }

    pub fn zero(layout: Arc<AnsatzLayout>) -> Self {
        let d = layout.depth();
        Self {
            theta: vec![0.0; d],
            layout,
        }
    }

    fn n_half(&self) -> usize {
        self.layout.n_qubits / 2
    }

    /// Amplitudes with factor `shift = (layer, factor)` advanced by π/2.
    fn amplitudes_with_shift(&self, shift: Option<(usize, usize)>) -> Result<Vec<Complex64>> {
        let mut amps = prepare_mu0(self.n_half())?.into_amplitudes();
        for (d, layer) in self.layout.layers.iter().enumerate() {
            for (k, f) in layer.iter().enumerate() {
                let mut angle = self.theta[d] * f.weight;
                if shift == Some((d, k)) {
                    angle += std::f64::consts::FRAC_PI_2;
                }
                apply_pauli_rotation(&mut amps, &f.string, angle);
            }
        }
        Ok(amps)
    }

    /// `|φ(θ)⟩`.
    pub fn state(&self) -> Result<StateVector> {
        StateVector::new(self.layout.n_qubits, self.amplitudes_with_shift(None)?)
    }

    /// Normalized state with one factor shifted; `∂_m|φ⟩ = Σ_k w_k·shifted(m, k)`.
    pub fn shifted_state(&self, m: usize, k: usize) -> Result<StateVector> {
        if m >= self.theta.len() || k >= self.layout.layers[m].len() {
            return Err(Error::Input(format!("no factor ({m}, {k})")));
        }
        StateVector::new(self.layout.n_qubits, self.amplitudes_with_shift(Some((m, k)))?)
    }

    /// `∂|φ(θ)⟩/∂θ_m` by the product rule over the layer's factors.
    pub fn derivative_state(&self, m: usize) -> Result<Vec<Complex64>> {
        if m >= self.theta.len() {
            return Err(Error::Input(format!(
                "parameter {m} out of range (depth {})",
                self.theta.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); 1 << self.layout.n_qubits];
        for (k, f) in self.layout.layers[m].iter().enumerate() {
            let s = self.amplitudes_with_shift(Some((m, k)))?;
            for (o, v) in out.iter_mut().zip(&s) {
                *o += v * f.weight;
            }
        }
        Ok(out)
    }

    pub fn derivative_states(&self) -> Result<Vec<Vec<Complex64>>> {
        (0..self.theta.len()).map(|m| self.derivative_state(m)).collect()
    }
}

/// Estimation mode for the A matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AMode {
    #[default]
    Exact,
    /// Hadamard tests with this many shots per factor pair.
    Shots(u64),
}

/// Estimation mode for the C vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CMode {
    #[default]
    Exact,
    /// Shadows of the ancilla superposition states with median of means per term.
    Shadow {
        samples: usize,
        groups: usize,
        locality: Locality,
    },
}

/// `A_nm = Re⟨∂_nφ|∂_mφ⟩`.
pub fn build_a_matrix(ansatz: &AnsatzState, mode: AMode, seed: u64) -> Result<DMatrix<f64>> {
    let d = ansatz.theta.len();
    match mode {
        AMode::Exact => {
            let ds = ansatz.derivative_states()?;
            Ok(gram(&ds))
        }
        AMode::Shots(shots) => {
            if shots == 0 {
                return Err(Error::Input("shot count must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut states = Vec::new();
            for (m, layer) in ansatz.layout.layers.iter().enumerate() {
                let row: Vec<(f64, StateVector)> = (0..layer.len())
                    .map(|k| Ok((layer[k].weight, ansatz.shifted_state(m, k)?)))
                    .collect::<Result<_>>()?;
                states.push(row);
            }
            let mut a = DMatrix::zeros(d, d);
            for n in 0..d {
                for m in n..d {
                    let mut acc = 0.0;
                    for (wk, sk) in &states[n] {
                        for (wl, sl) in &states[m] {
                            let re = inner(sk.amplitudes(), sl.amplitudes()).re;
                            acc += wk * wl * hadamard_test(re, shots, &mut rng)?;
                        }
                    }
                    a[(n, m)] = acc;
                    a[(m, n)] = acc;
                }
            }
            Ok(a)
        }
    }
}

/// Estimate of `Re⟨a|b⟩` as `2·Pr(0) − 1` from binomial counts.
fn hadamard_test(re: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let p0 = (0.5 * (1.0 + re)).clamp(0.0, 1.0);
    let count = Binomial::new(shots, p0)
        .map_err(|e| Error::Numerical(format!("binomial: {e}")))?
        .sample(rng);
    Ok(2.0 * count as f64 / shots as f64 - 1.0)
}

fn gram(ds: &[Vec<Complex64>]) -> DMatrix<f64> {
    let d = ds.len();
    let mut a = DMatrix::zeros(d, d);
    for n in 0..d {
        for m in n..d {
            let v = inner(&ds[n], &ds[m]).re;
            a[(n, m)] = v;
            a[(m, n)] = v;
        }
    }
    a
}

/// Result of a C-vector evaluation.
#[derive(Clone, Debug)]
pub struct CVector {
    pub c: DVector<f64>,
    /// `⟨φ|H|φ⟩` used in `E`.
    pub energy: f64,
    /// `E = 1 − δβ⟨φ|H|φ⟩`.
    pub e_beta: f64,
    pub snapshots: usize,
}

fn e_factor(energy: f64, delta_beta: f64) -> Result<f64> {
    let e = 1.0 - delta_beta * energy;
    if !(e > 0.0) {
        return Err(Error::StepSize {
            delta_beta,
            energy_factor: e,
        });
    }
    Ok(e)
}

/// C vector of the projected step for inverse-temperature increment `delta_beta`.
pub fn build_c_vector(
    ansatz: &AnsatzState,
    h: &Hamiltonian,
    delta_beta: f64,
    mode: CMode,
    seed: u64,
) -> Result<CVector> {
    let n = h.n_qubits();
    if 2 * n != ansatz.layout.n_qubits {
        return Err(Error::Input("Hamiltonian does not match the ansatz register".into()));
    }
    if !(delta_beta >= 0.0) {
        return Err(Error::Input(format!("delta_beta must be >= 0, got {delta_beta}")));
    }
    let tau = 0.5 * delta_beta;
    let phi = ansatz.state()?;
    match mode {
        CMode::Exact => {
            let hphi = apply_terms(phi.amplitudes(), h.terms());
            let energy = inner(phi.amplitudes(), &hphi).re;
            let e = e_factor(energy, delta_beta)?;
            let ds = ansatz.derivative_states()?;
            let c = DVector::from_iterator(
                ds.len(),
                ds.iter().map(|dm| {
                    (1.0 / e.sqrt() - 1.0) * inner(dm, phi.amplitudes()).re
                        - tau / e.sqrt() * inner(dm, &hphi).re
                }),
            );
            Ok(CVector {
                c,
                energy,
                e_beta: e,
                snapshots: 0,
            })
        }
        CMode::Shadow {
            samples,
            groups,
            locality,
        } => {
            let mm = MMConfig::new(samples, groups)?;
            let mut used = 0;
            // ⟨φ|H|φ⟩ from a shadow of |φ⟩, median of means per term.
            let opts = ShadowOptions {
                locality,
                register_qubits: None,
                label: "phi".into(),
            };
            let shadow = collect_shadow_with(&phi, samples, derive_seed(seed, 0), &opts)?;
            used += samples;
            let mut energy = 0.0;
            for t in h.terms() {
                let obs = PauliSum::from_terms(n, vec![PauliTerm::new(1.0, t.string)])?;
                energy += t.coefficient * estimate_observable(&shadow, &obs, mm)?;
            }
            let e = e_factor(energy, delta_beta)?;
            let anc = 2 * n;
            let xi = PauliSum::from_terms(
                anc + 1,
                vec![PauliTerm::new(1.0, PauliString::from_masks(anc + 1, 1 << anc, 0)?)],
            )?;
            let x_terms: Vec<(f64, PauliSum)> = h
                .terms()
                .iter()
                .map(|t| {
                    let s = PauliString::from_masks(
                        anc + 1,
                        t.string.x_mask() | 1 << anc,
                        t.string.z_mask(),
                    )?;
                    Ok((t.coefficient, PauliSum::from_terms(anc + 1, vec![PauliTerm::new(1.0, s)])?))
                })
                .collect::<Result<_>>()?;
            let mut c = DVector::zeros(ansatz.theta.len());
            let mut idx = 1u64;
            for (m, layer) in ansatz.layout.layers.iter().enumerate() {
                for (k, f) in layer.iter().enumerate() {
                    let shifted = ansatz.shifted_state(m, k)?;
                    let r = std::f64::consts::FRAC_1_SQRT_2;
                    let amps: Vec<Complex64> = phi
                        .amplitudes()
                        .iter()
                        .chain(shifted.amplitudes())
                        .map(|a| a * r)
                        .collect();
                    let psi = StateVector::new(anc + 1, amps)?;
                    let opts = ShadowOptions {
                        locality,
                        register_qubits: None,
                        label: format!("ancilla {m}/{k}"),
                    };
                    let sh = collect_shadow_with(&psi, samples, derive_seed(seed, idx), &opts)?;
                    idx += 1;
                    used += samples;
                    let o_i = estimate_observable(&sh, &xi, mm)?;
                    let mut o_h = 0.0;
                    for (coef, obs) in &x_terms {
                        o_h += coef * estimate_observable(&sh, obs, mm)?;
                    }
                    c[m] += f.weight * ((1.0 / e.sqrt() - 1.0) * o_i - tau / e.sqrt() * o_h);
                }
            }
            Ok(CVector {
                c,
                energy,
                e_beta: e,
                snapshots: used,
            })
        }
    }
}

/// Solve `(A + λI)δθ = C`.
pub fn solve_step(a: &DMatrix<f64>, c: &DVector<f64>, lambda_reg: f64) -> Result<DVector<f64>> {
    let d = a.nrows();
    if a.ncols() != d || c.len() != d {
        return Err(Error::Input("A must be square and match C".into()));
    }
    if !(lambda_reg >= 0.0) {
        return Err(Error::Input("regularization must be >= 0".into()));
    }
    let sym = (a - a.transpose()).abs().max();
    if sym > 1e-10 * (1.0 + a.abs().max()) {
        return Err(Error::Input("A is not symmetric".into()));
    }
    let m = a + DMatrix::identity(d, d) * lambda_reg;
    let x = match m.clone().cholesky() {
        Some(ch) => ch.solve(c),
        None => {
            // Indefinite after regularization (shot noise): pseudo-inverse on the eigenbasis.
            let eig = m.symmetric_eigen();
            let tol = 1e-12 * eig.eigenvalues.abs().max().max(1.0);
            let proj = eig.eigenvectors.transpose() * c;
            let scaled = DVector::from_iterator(
                d,
                proj.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(p, l)| if l.abs() > tol { p / l } else { 0.0 }),
            );
            &eig.eigenvectors * scaled
        }
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("linear solve produced non-finite values".into()));
    }
    Ok(x)
}

/// Stepping options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvgsConfig {
    pub depth: usize,
    pub delta_beta: f64,
    pub lambda_reg: f64,
    pub layout: LayoutKind,
    pub a_mode: AMode,
    pub c_mode: CMode,
    /// Halvings of `δβ` allowed when `E ≤ 0`.
    pub max_retries: usize,
    pub seed: u64,
    /// Compare with the exact Gibbs state when the dense oracle is affordable.
    pub track_fidelity: bool,
}

impl Default for PvgsConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            delta_beta: 0.01,
            lambda_reg: 1e-6,
            layout: LayoutKind::Grouped,
            a_mode: AMode::Exact,
            c_mode: CMode::Exact,
            max_retries: 6,
            seed: 0,
            track_fidelity: true,
        }
    }
}

/// One accepted imaginary-time step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub beta: f64,
    pub theta: Vec<f64>,
    pub a_matrix: Vec<Vec<f64>>,
    pub c_vector: Vec<f64>,
    /// `‖Σ_m ∂_mφ δθ_m − d|μ⟩‖²` at the solved step.
    pub residual_loss: f64,
    /// The same loss at `δθ = 0`.
    pub initial_loss: f64,
    pub energy: f64,
    pub fidelity: Option<f64>,
    /// `(Dλ_max²/E)·Σ_m 1/(a_m + λ) − λ_min` with `a_m` the eigenvalues of A and
    /// `λ_max, λ_min` the extreme eigenvalues of H (logged, not enforced).
    pub expressibility: Option<f64>,
    pub snapshots: usize,
}

/// Trial state emitted at a requested inverse temperature.
#[derive(Clone, Debug)]
pub struct GibbsSample {
    pub beta: f64,
    pub ansatz: AnsatzState,
    pub state: StateVector,
    pub fidelity: Option<f64>,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub samples: Vec<GibbsSample>,
    pub trajectory: Vec<StepRecord>,
}

impl Evolution {
    pub fn total_snapshots(&self) -> usize {
        self.trajectory.iter().map(|r| r.snapshots).sum()
    }
}

fn fidelity(spec: Option<&Spectrum>, beta: f64, state: &StateVector) -> Result<Option<f64>> {
    match spec {
        Some(s) => Ok(Some(gibbs_from_spectrum(s, beta)?.state.overlap(state)?)),
        None => Ok(None),
    }
}

/// Step from `β = 0`, `θ = 0` to each target in ascending order.
pub fn evolve(h: &Hamiltonian, beta_targets: &[f64], cfg: &PvgsConfig) -> Result<Evolution> {
    if beta_targets.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::Input("beta targets must be finite and >= 0".into()));
    }
    if beta_targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Input("beta targets must be ascending".into()));
    }
    if !(cfg.delta_beta > 0.0) {
        return Err(Error::Config("delta_beta must be positive".into()));
    }
    let n = h.n_qubits();
    let limits = DenseLimits::default();
    limits.check_doubled(n)?;
    // The spectrum feeds the fidelity oracle and the logged expressibility bound.
    let spec = spectrum(h, &limits)?;
    let (lmin, lmax) = (spec.min(), spec.max());
    let spec_ref = cfg.track_fidelity.then_some(&spec);
    let layout = Arc::new(AnsatzLayout::hamiltonian_variational(h, cfg.depth, cfg.layout)?);
    let mut ansatz = AnsatzState::zero(layout);
    let mut beta = 0.0;
    let mut samples = Vec::new();
    let mut trajectory = Vec::new();
    let mut step_index = 0u64;
    for &target in beta_targets {
        while beta < target - 1e-12 {
            let mut db = cfg.delta_beta.min(target - beta);
            let mut tries = 0;
            let (record, next) = loop {
                match pvgs_step(&ansatz, h, db, cfg, step_index, (lmin, lmax)) {
                    Ok(v) => break v,
                    Err(Error::StepSize { .. }) if tries < cfg.max_retries => {
                        db *= 0.5;
                        tries += 1;
                    }
                    Err(e) => return Err(e),
                }
            };
            step_index += 1;
            beta += db;
            ansatz = next;
            let state = ansatz.state()?;
            let mut record = record;
            record.beta = beta;
            record.theta = ansatz.theta.clone();
            record.energy = crate::exactsim::expectation(&state, h)?;
            record.fidelity = fidelity(spec_ref, beta, &state)?;
            trajectory.push(record);
        }
        let state = ansatz.state()?;
        samples.push(GibbsSample {
            beta: target,
            ansatz: ansatz.clone(),
            fidelity: fidelity(spec_ref, target, &state)?,
            energy: crate::exactsim::expectation(&state, h)?,
            state,
        });
    }
    Ok(Evolution {
        samples,
        trajectory,
    })
}

fn pvgs_step(
    ansatz: &AnsatzState,
    h: &Hamiltonian,
    db: f64,
    cfg: &PvgsConfig,
    step_index: u64,
    (lmin, lmax): (f64, f64),
) -> Result<(StepRecord, AnsatzState)> {
    let seed = derive_seed(cfg.seed, step_index);
    let cv = build_c_vector(ansatz, h, db, cfg.c_mode, derive_seed(seed, 1))?;
    let a = build_a_matrix(ansatz, cfg.a_mode, derive_seed(seed, 2))?;
    let dtheta = solve_step(&a, &cv.c, cfg.lambda_reg)?;

    // Dense projection loss against the first-order target.
    let phi = ansatz.state()?;
    let hphi = apply_terms(phi.amplitudes(), h.terms());
    let energy = inner(phi.amplitudes(), &hphi).re;
    let e = 1.0 - db * energy;
    let tau = 0.5 * db;
    let target: Vec<Complex64> = phi
        .amplitudes()
        .iter()
        .zip(&hphi)
        .map(|(p, hp)| (p - hp * tau) / e.max(f64::MIN_POSITIVE).sqrt() - p)
        .collect();
    let ds = ansatz.derivative_states()?;
    let mut moved = vec![Complex64::new(0.0, 0.0); target.len()];
    for (dm, w) in ds.iter().zip(dtheta.iter()) {
        for (o, v) in moved.iter_mut().zip(dm) {
            *o += v * *w;
        }
    }
    let loss = |v: &[Complex64]| -> f64 {
        v.iter().zip(&target).map(|(a, b)| (a - b).norm_sqr()).sum()
    };
    let residual_loss = loss(&moved);
    let initial_loss = loss(&vec![Complex64::new(0.0, 0.0); target.len()]);

    let expressibility = {
        let eig = a.clone().symmetric_eigen();
        let inv: f64 = eig.eigenvalues.iter().map(|v| 1.0 / (v.max(0.0) + cfg.lambda_reg)).sum();
        let lm = lmax.abs().max(lmin.abs());
        Some(a.nrows() as f64 * lm * lm / cv.e_beta * inv - lmin)
    };

    let theta: Vec<f64> = ansatz.theta.iter().zip(dtheta.iter()).map(|(t, d)| t + d).collect();
    let next = AnsatzState::new(ansatz.layout.clone(), theta)?;
    Ok((
        StepRecord {
            beta: 0.0,
            theta: Vec::new(),
            a_matrix: (0..a.nrows()).map(|i| a.row(i).iter().cloned().collect()).collect(),
            c_vector: cv.c.iter().cloned().collect(),
            residual_loss,
            initial_loss,
            energy: 0.0,
            fidelity: None,
            expressibility,
            snapshots: cv.snapshots,
        },
        next,
    ))
}
