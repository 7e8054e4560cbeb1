//! Dense statevector simulation and the brute-force oracle.
//!
//! Basis index bit `j` is qubit `j`. A doubled register of `2n` qubits stores
//! the first register in the low `n` bits, so a Pauli string on `n` qubits acts
//! on the first register without any padding. Viewed as an `N×N` matrix
//! (`N = 2^n`) a doubled state has entry `[(i1, i2)] = amp[i1 + N·i2]`, which
//! is exactly nalgebra's column-major layout.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, PauliString, PauliTerm};

const NORM_TOL: f64 = 1e-10;

/// Qubit limits for dense work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLimits {
    /// Largest single-register qubit count.
    pub single: usize,
    /// Largest per-register qubit count of a doubled state.
    pub doubled_per_register: usize,
}

impl Default for DenseLimits {
    fn default() -> Self {
        Self {
            single: 12,
            doubled_per_register: 10,
        }
    }
}

impl DenseLimits {
    pub fn check_single(&self, n: usize) -> Result<()> {
        if n > self.single {
            return Err(Error::Resource(format!(
                "{n} qubits exceeds the dense limit {}",
                self.single
            )));
        }
        Ok(())
    }

    pub fn check_doubled(&self, n: usize) -> Result<()> {
        if n > self.doubled_per_register {
            return Err(Error::Resource(format!(
                "doubled register of 2x{n} qubits exceeds the limit 2x{}",
                self.doubled_per_register
            )));
        }
        Ok(())
    }
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wrap amplitudes, checking length and unit norm.
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_qubits > 30 || amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Input(format!(
                "{} amplitudes do not describe {n_qubits} qubits",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Input(format!("state norm² {norm} is not 1")));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wrap amplitudes after dividing by their norm.
    pub fn normalized(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("cannot normalize a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(n_qubits, amplitudes)
    }

    pub fn basis(n_qubits: usize, index: u64) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index as usize >= dim {
            return Err(Error::Input(format!("basis index {index} out of range")));
        }
        let mut a = vec![Complex64::new(0.0, 0.0); dim];
        a[index as usize] = Complex64::new(1.0, 0.0);
        Self::new(n_qubits, a)
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Haar-random state from complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        let a = (0..1usize << n_qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::normalized(n_qubits, a)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Input("qubit count mismatch".into()));
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Sample a basis index from the Born distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        sample_index(&self.amplitudes, rng)
    }
}

/// `Σ conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Sample an index with probability `|amp|²` (amplitudes assumed normalized).
pub fn sample_index<R: Rng + ?Sized>(amps: &[Complex64], rng: &mut R) -> u64 {
    let r: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if r < acc {
            return i as u64;
        }
    }
    last_nonzero as u64
}

/// Elementary gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Sdg(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    Swap(usize, usize),
    /// `exp(−i·angle·P)`.
    PauliRotation { string: PauliString, angle: f64 },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Cz(a, b) | Gate::Swap(a, b) => vec![a, b],
            Gate::PauliRotation { ref string, .. } => {
                (0..string.n_qubits()).filter(|&q| string.support() >> q & 1 == 1).collect()
            }
        }
    }

    /// Qubits the gate touches.
    pub fn support(&self) -> Vec<usize> {
        self.qubits()
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Apply a 2×2 matrix `[[a, b], [c, d]]` to qubit `q`.
pub fn apply_1q(amps: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a0, a1) = (amps[i], amps[i | bit]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Hadamard on qubit `q`.
pub fn apply_h(amps: &mut [Complex64], q: usize) {
    let bit = 1usize << q;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a0, a1) = (amps[i], amps[i | bit]);
            amps[i] = (a0 + a1) * s;
            amps[i | bit] = (a0 - a1) * s;
        }
    }
}

/// `out = P·amps` for one Pauli string (masks act on the low qubits).
pub fn apply_pauli_into(amps: &[Complex64], p: &PauliString, out: &mut [Complex64]) {
    let base = crate::pauli::Phase::from_exponent(p.y_count()).to_complex();
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    for (i, a) in amps.iter().enumerate() {
        let v = if (z & i).count_ones() % 2 == 0 { *a } else { -*a };
        out[i ^ x] = base * v;
    }
}

/// In-place `exp(−iθP)`: `cos θ·ψ − i sin θ·Pψ`.
pub fn apply_pauli_rotation(amps: &mut [Complex64], p: &PauliString, angle: f64) {
    let (co, si) = (angle.cos(), angle.sin());
    let base = crate::pauli::Phase::from_exponent(p.y_count()).to_complex();
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    let sign = |i: usize| if (z & i).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let mi_sin = c(0.0, -si);
    if x == 0 {
        for (i, a) in amps.iter_mut().enumerate() {
            *a *= c(co, 0.0) + mi_sin * base * sign(i);
        }
        return;
    }
    let low = 1usize << (63 - (x as u64).leading_zeros());
    for i in 0..amps.len() {
        if i & low == 0 {
            let j = i ^ x;
            let (ai, aj) = (amps[i], amps[j]);
            // (Pψ)_j = base·sign(i)·ψ_i and (Pψ)_i = base·sign(j)·ψ_j.
            amps[i] = ai * co + mi_sin * base * sign(j) * aj;
            amps[j] = aj * co + mi_sin * base * sign(i) * ai;
        }
    }
}

fn apply_gate(amps: &mut [Complex64], n: usize, g: &Gate) -> Result<()> {
    for q in g.qubits() {
        if q >= n {
            return Err(Error::Input(format!("gate {g:?} targets qubit {q} >= {n}")));
        }
    }
    let zero = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match *g {
        Gate::H(q) => apply_h(amps, q),
        Gate::X(q) => apply_1q(amps, q, [[zero, one], [one, zero]]),
        Gate::Y(q) => apply_1q(amps, q, [[zero, c(0.0, -1.0)], [c(0.0, 1.0), zero]]),
        Gate::Z(q) => apply_1q(amps, q, [[one, zero], [zero, -one]]),
        Gate::S(q) => apply_1q(amps, q, [[one, zero], [zero, c(0.0, 1.0)]]),
        Gate::Sdg(q) => apply_1q(amps, q, [[one, zero], [zero, c(0.0, -1.0)]]),
        Gate::Rx(q, t) => {
            let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
            apply_1q(amps, q, [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]])
        }
        Gate::Ry(q, t) => {
            let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
            apply_1q(amps, q, [[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]])
        }
        Gate::Rz(q, t) => {
            let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
            apply_1q(amps, q, [[c(co, -si), zero], [zero, c(co, si)]])
        }
        Gate::Cnot { control, target } => {
            if control == target {
                return Err(Error::Input("CNOT control equals target".into()));
            }
            let (cb, tb) = (1usize << control, 1usize << target);
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    amps.swap(i, i | tb);
                }
            }
        }
        Gate::Cz(a, b) => {
            let m = (1usize << a) | (1usize << b);
            for (i, v) in amps.iter_mut().enumerate() {
                if i & m == m {
                    *v = -*v;
                }
            }
        }
        Gate::Swap(a, b) => {
            let (ab, bb) = (1usize << a, 1usize << b);
            for i in 0..amps.len() {
                if i & ab != 0 && i & bb == 0 {
                    amps.swap(i, i ^ ab ^ bb);
                }
            }
        }
        Gate::PauliRotation { ref string, angle } => {
            if string.n_qubits() > n {
                return Err(Error::Input("rotation string longer than register".into()));
            }
            apply_pauli_rotation(amps, string, angle)
        }
    }
    Ok(())
}

/// Apply gates in order to a copy of `state`.
pub fn apply_circuit(state: &StateVector, circuit: &[Gate]) -> Result<StateVector> {
    let mut amps = state.amplitudes.clone();
    apply_gates_in_place(&mut amps, state.n_qubits, circuit)?;
    Ok(StateVector {
        n_qubits: state.n_qubits,
        amplitudes: amps,
    })
}

/// Apply gates in order to raw amplitudes.
pub fn apply_gates_in_place(amps: &mut [Complex64], n: usize, circuit: &[Gate]) -> Result<()> {
    for g in circuit {
        apply_gate(amps, n, g)?;
    }
    Ok(())
}

/// `Σ_k c_k P_k ψ` for terms acting on the low qubits of `amps`.
pub fn apply_terms(amps: &[Complex64], terms: &[PauliTerm]) -> Vec<Complex64> {
    let mut out = vec![c(0.0, 0.0); amps.len()];
    let mut tmp = vec![c(0.0, 0.0); amps.len()];
    for t in terms {
        apply_pauli_into(amps, &t.string, &mut tmp);
        for (o, v) in out.iter_mut().zip(&tmp) {
            *o += v * t.coefficient;
        }
    }
    out
}

/// `⟨ψ|P|ψ⟩` for a string on the low qubits.
pub fn pauli_expectation(amps: &[Complex64], p: &PauliString) -> Complex64 {
    let base = crate::pauli::Phase::from_exponent(p.y_count()).to_complex();
    let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
    let mut acc = c(0.0, 0.0);
    for (i, a) in amps.iter().enumerate() {
        let v = if (z & i).count_ones() % 2 == 0 { *a } else { -*a };
        acc += amps[i ^ x].conj() * v;
    }
    acc * base
}

/// `⟨ψ|H|ψ⟩`; `h` may act on the first register of a larger state.
pub fn expectation(state: &StateVector, h: &Hamiltonian) -> Result<f64> {
    terms_expectation(state, h.n_qubits(), h.terms())
}

/// `⟨ψ|Σ c P|ψ⟩` for terms on the first `n_terms` qubits.
pub fn terms_expectation(state: &StateVector, n_terms: usize, terms: &[PauliTerm]) -> Result<f64> {
    if n_terms > state.n_qubits {
        return Err(Error::Input(format!(
            "observable on {n_terms} qubits, state has {}",
            state.n_qubits
        )));
    }
    let mut acc = c(0.0, 0.0);
    for t in terms {
        acc += pauli_expectation(&state.amplitudes, &t.string) * t.coefficient;
    }
    let scale = 1.0 + acc.re.abs();
    if acc.im.abs() > 1e-10 * scale.max(1.0) * (terms.len().max(1) as f64) {
        return Err(Error::Numerical(format!(
            "expectation has imaginary residue {}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// Eigenvalues and (unless diagonal) eigenvectors of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub n_qubits: usize,
    /// Eigenvalue `x`; for diagonal Hamiltonians indexed by basis state.
    pub values: Vec<f64>,
    /// Columns are eigenvectors; `None` means the computational basis.
    pub vectors: Option<DMatrix<Complex64>>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|λ|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `ln Σ exp(−βλ)` with a max shift for stability.
    pub fn log_partition(&self, beta: f64) -> f64 {
        let m = self
            .values
            .iter()
            .map(|l| -beta * l)
            .fold(f64::NEG_INFINITY, f64::max);
        m + self.values.iter().map(|l| (-beta * l - m).exp()).sum::<f64>().ln()
    }

    pub fn partition(&self, beta: f64) -> f64 {
        self.values.iter().map(|l| (-beta * l).exp()).sum()
    }

    /// Eigenvector `x` as a column (basis vector for diagonal spectra).
    pub fn vector(&self, x: usize) -> Vec<Complex64> {
        match &self.vectors {
            Some(v) => v.column(x).iter().cloned().collect(),
            None => {
                let mut e = vec![c(0.0, 0.0); self.values.len()];
                e[x] = c(1.0, 0.0);
                e
            }
        }
    }

    /// Weights `‖v_x† Ψ‖²` of a doubled state on the first-register eigenbasis.
    ///
    /// `⟨ψ|f(H)⊗I|ψ⟩ = Σ_x f(λ_x)·weight_x`.
    pub fn register_weights(&self, state: &StateVector) -> Result<Vec<f64>> {
        let n = self.n_qubits;
        let dim = 1usize << n;
        if state.n_qubits < n {
            return Err(Error::Input("state smaller than Hamiltonian".into()));
        }
        let rest = state.amplitudes.len() / dim;
        let psi = DMatrix::from_column_slice(dim, rest, &state.amplitudes);
        let w = match &self.vectors {
            Some(v) => v.adjoint() * psi,
            None => psi,
        };
        Ok((0..dim)
            .map(|x| w.row(x).iter().map(|a| a.norm_sqr()).sum())
            .collect())
    }
}

/// Diagonalize `h` densely (bitstring loop for diagonal Hamiltonians).
pub fn spectrum(h: &Hamiltonian, limits: &DenseLimits) -> Result<Spectrum> {
    let n = h.n_qubits();
    limits.check_single(n)?;
    let dim = 1usize << n;
    if h.is_diagonal() {
        let values = (0..dim as u64).map(|i| h.diagonal_energy(i)).collect();
        return Ok(Spectrum {
            n_qubits: n,
            values,
            vectors: None,
        });
    }
    let m = crate::pauli::terms_to_matrix(n, h.terms(), limits.single)?;
    if h.is_real() {
        let re = m.map(|z| z.re);
        let eig = SymmetricEigen::new(re);
        let vectors = eig.eigenvectors.map(|v| c(v, 0.0));
        Ok(Spectrum {
            n_qubits: n,
            values: eig.eigenvalues.iter().cloned().collect(),
            vectors: Some(vectors),
        })
    } else {
        let eig = SymmetricEigen::new(m);
        Ok(Spectrum {
            n_qubits: n,
            values: eig.eigenvalues.iter().cloned().collect(),
            vectors: Some(eig.eigenvectors),
        })
    }
}

/// `Z(β) = Σ_x exp(−βλ_x)`.
pub fn exact_partition(h: &Hamiltonian, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::Input(format!("beta must be >= 0, got {beta}")));
    }
    Ok(spectrum(h, &DenseLimits::default())?.partition(beta))
}

/// Doubled-register Gibbs purification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsPurification {
    pub beta: f64,
    pub state: StateVector,
    pub z_value: f64,
}

/// `Σ_x w_x v_x⊗v_x` with `w_x = exp(−βλ_x/2)/√Z`.
pub fn gibbs_from_spectrum(spec: &Spectrum, beta: f64) -> Result<GibbsPurification> {
    let n = spec.n_qubits;
    let dim = 1usize << n;
    let shift = spec.min();
    let zs: f64 = spec.values.iter().map(|l| (-beta * (l - shift)).exp()).sum();
    let w: Vec<f64> = spec
        .values
        .iter()
        .map(|l| ((-beta * (l - shift)).exp() / zs).sqrt())
        .collect();
    let amps = match &spec.vectors {
        None => {
            let mut a = vec![c(0.0, 0.0); dim * dim];
            for (x, wx) in w.iter().enumerate() {
                a[x + dim * x] = c(*wx, 0.0);
            }
            a
        }
        Some(v) => {
            let mut vw = v.clone();
            for (x, wx) in w.iter().enumerate() {
                vw.column_mut(x).scale_mut(*wx);
            }
            let m = vw * v.transpose();
            m.as_slice().to_vec()
        }
    };
    let z_value = spec.partition(beta);
    Ok(GibbsPurification {
        beta,
        state: StateVector::normalized(2 * n, amps)?,
        z_value,
    })
}

/// Exact Gibbs purification `|μ_β⟩` on `2n` qubits.
pub fn exact_gibbs(h: &Hamiltonian, beta: f64) -> Result<GibbsPurification> {
    if !(beta >= 0.0) {
        return Err(Error::Input(format!("beta must be >= 0, got {beta}")));
    }
    let limits = DenseLimits::default();
    limits.check_doubled(h.n_qubits())?;
    gibbs_from_spectrum(&spectrum(h, &limits)?, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{ham_ising, Letter};

    #[test]
    fn hadamard_on_zero() {
        let s = apply_circuit(&StateVector::zero(1).unwrap(), &[Gate::H(0)]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - r).abs() < 1e-12);
        assert!((s.amplitudes()[1].re - r).abs() < 1e-12);
    }

    #[test]
    fn x_twice_is_identity() {
        let z = StateVector::zero(2).unwrap();
        let s = apply_circuit(&z, &[Gate::X(1), Gate::X(1)]).unwrap();
        assert_eq!(s, z);
    }

    #[test]
    fn out_of_range_gate() {
        let z = StateVector::zero(2).unwrap();
        assert!(matches!(apply_circuit(&z, &[Gate::H(2)]), Err(Error::Input(_))));
    }

    #[test]
    fn z_expectation_on_zero() {
        let h = Hamiltonian::new(
            1,
            vec![PauliTerm::new(1.0, PauliString::single(1, 0, Letter::Z).unwrap())],
        )
        .unwrap();
        assert!((expectation(&StateVector::zero(1).unwrap(), &h).unwrap() - 1.0).abs() < 1e-12);
        assert!((exact_partition(&h, 1.0).unwrap() - 2.0 * 1f64.cosh()).abs() < 1e-12);
    }

    #[test]
    fn partition_at_zero_is_dimension() {
        let h = ham_ising(3).unwrap();
        assert!((exact_partition(&h, 0.0).unwrap() - 8.0).abs() < 1e-10);
    }

    #[test]
    fn gibbs_normalized() {
        let g = exact_gibbs(&ham_ising(2).unwrap(), 0.7).unwrap();
        assert!((g.state.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
