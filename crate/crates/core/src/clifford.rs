//! Clifford tableaus, exactly uniform Clifford sampling, and snapshot collection.
//!
//! A [`CliffordElement`] stores the images `U X_j U†` and `U Z_j U†` as
//! Hermitian [`PhasedPauli`] rows. Sampled elements also carry a layered
//! canonical form `Q·Diag(Γ1)·Lin(Δ1)·Had(h)·Perm(π)·Diag(Γ2)·Lin(Δ2)` that
//! acts on dense states in a handful of passes.
//!
//! The layers are sampled with a quantum-Mallows distribution over `(h, π)`,
//! uniform lower-unitriangular `Δ`, uniform symmetric `Γ` and a uniform Pauli
//! `Q`, which gives the uniform distribution over the Clifford group modulo phase.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exactsim::{apply_gates_in_place, apply_h, sample_index, Gate, StateVector};
use crate::pauli::{Phase, PauliString, PhasedPauli};

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(j)
        }
    })
}

/// Conjugate a Pauli by a Clifford gate acting on the low qubits.
pub fn conjugate_by_gate(p: PhasedPauli, gate: &Gate) -> Result<PhasedPauli> {
    let mut out = p;
    let bit = |q: usize| 1u64 << q;
    let has = |m: u64, q: usize| m >> q & 1 == 1;
    match *gate {
        Gate::H(q) => {
            let (xq, zq) = (has(p.x, q), has(p.z, q));
            if xq && zq {
                out.k = (out.k + 2) % 4;
            }
            out.x = (p.x & !bit(q)) | ((zq as u64) << q);
            out.z = (p.z & !bit(q)) | ((xq as u64) << q);
        }
        Gate::S(q) | Gate::Sdg(q) => {
            if has(p.x, q) {
                out.k = (out.k + if matches!(gate, Gate::S(_)) { 1 } else { 3 }) % 4;
                out.z ^= bit(q);
            }
        }
        Gate::X(q) => out.k = (out.k + 2 * (has(p.z, q) as u8)) % 4,
        Gate::Z(q) => out.k = (out.k + 2 * (has(p.x, q) as u8)) % 4,
        Gate::Y(q) => out.k = (out.k + 2 * ((has(p.x, q) ^ has(p.z, q)) as u8)) % 4,
        Gate::Cnot { control, target } => {
            if has(p.x, control) {
                out.x ^= bit(target);
            }
            if has(p.z, target) {
                out.z ^= bit(control);
            }
        }
        Gate::Cz(a, b) => {
            if has(p.x, a) && has(p.x, b) {
                out.k = (out.k + 2) % 4;
            }
            if has(p.x, a) {
                out.z ^= bit(b);
            }
            if has(p.x, b) {
                out.z ^= bit(a);
            }
        }
        Gate::Swap(a, b) => {
            let sw = |m: u64| {
                let (ba, bb) = (m >> a & 1, m >> b & 1);
                (m & !(bit(a) | bit(b))) | (ba << b) | (bb << a)
            };
            out.x = sw(p.x);
            out.z = sw(p.z);
        }
        _ => {
            return Err(Error::Input(format!("{gate:?} is not a Clifford gate")));
        }
    }
    Ok(out)
}

/// GF(2) square matrix as rows of bits; row `i` bit `j` is entry `(i, j)`.
fn gf2_inverse(rows: &[u64]) -> Result<Vec<u64>> {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut inv: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
    for c in 0..n {
        let p = (c..n)
            .find(|&r| a[r] >> c & 1 == 1)
            .ok_or_else(|| Error::Numerical("singular GF(2) matrix".into()))?;
        a.swap(c, p);
        inv.swap(c, p);
        for r in 0..n {
            if r != c && a[r] >> c & 1 == 1 {
                a[r] ^= a[c];
                inv[r] ^= inv[c];
            }
        }
    }
    Ok(inv)
}

/// Columns of a matrix given by rows (i.e. its transpose as rows).
fn gf2_transpose(rows: &[u64], n: usize) -> Vec<u64> {
    (0..n)
        .map(|j| {
            rows.iter()
                .enumerate()
                .fold(0u64, |acc, (i, r)| acc | ((r >> j & 1) << i))
        })
        .collect()
}

/// One block of the layered canonical form on `n` qubits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    n: usize,
    /// Columns `Δ e_j` of the outer linear layer.
    delta1: Vec<u64>,
    /// Rows of the outer symmetric phase matrix.
    gamma1: Vec<u64>,
    had: u64,
    /// Qubit `j` moves to `perm[j]`.
    perm: Vec<usize>,
    delta2: Vec<u64>,
    gamma2: Vec<u64>,
    pauli_x: u64,
    pauli_z: u64,
    /// Rows of `Δ1^{-1}` and `Δ2^{-1}`.
    delta1_inv: Vec<u64>,
    delta2_inv: Vec<u64>,
}

/// Explicit parts of a canonical form; `delta` matrices are given as rows and
/// must be lower unitriangular, `gamma` matrices as symmetric rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalParts {
    pub delta1_rows: Vec<u64>,
    pub gamma1_rows: Vec<u64>,
    pub had: u64,
    pub perm: Vec<usize>,
    pub delta2_rows: Vec<u64>,
    pub gamma2_rows: Vec<u64>,
    pub pauli_x: u64,
    pub pauli_z: u64,
}

/// Probability table of the quantum-Mallows step with `m` remaining qubits.
fn mallows_weights(m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..2 * m).map(|k| 0.5f64.powi(k as i32)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Apply one step of the Mallows construction: returns `(had, chosen index)`.
fn mallows_step(index: usize, m: usize) -> (bool, usize) {
    if index < m {
        (true, index)
    } else {
        (false, 2 * m - index - 1)
    }
}

/// The Mallows draw lists sources; the permutation layer uses destinations.
fn invert_permutation(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (j, &q) in p.iter().enumerate() {
        inv[q] = j;
    }
    inv
}

/// All `(probability, had, perm)` outcomes of the Mallows sampler.
pub fn mallows_outcomes(n: usize) -> Vec<(f64, u64, Vec<usize>)> {
    fn rec(
        i: usize,
        n: usize,
        inds: Vec<usize>,
        had: u64,
        perm: Vec<usize>,
        p: f64,
        out: &mut Vec<(f64, u64, Vec<usize>)>,
    ) {
        if i == n {
            out.push((p, had, invert_permutation(&perm)));
            return;
        }
        let m = n - i;
        for (idx, w) in mallows_weights(m).into_iter().enumerate() {
            let (h, k) = mallows_step(idx, m);
            let mut inds2 = inds.clone();
            let q = inds2.remove(k);
            let mut perm2 = perm.clone();
            perm2.push(q);
            rec(i + 1, n, inds2, had | ((h as u64) << i), perm2, p * w, out);
        }
    }
    let mut out = Vec::new();
    rec(0, n, (0..n).collect(), 0, Vec::new(), 1.0, &mut out);
    out
}

impl CanonicalForm {
    /// Sample uniformly (the resulting Clifford is uniform modulo phase).
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut had = 0u64;
        let mut perm = Vec::with_capacity(n);
        let mut inds: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let m = n - i;
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let weights = mallows_weights(m);
            let mut idx = weights.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    idx = k;
                    break;
                }
            }
            let (h, k) = mallows_step(idx, m);
            had |= (h as u64) << i;
            perm.push(inds.remove(k));
        }
        let perm = invert_permutation(&perm);
        let lower = |rng: &mut R| -> Vec<u64> {
            (0..n)
                .map(|i| (rng.gen::<u64>() & low_mask(i)) | (1u64 << i))
                .collect()
        };
        let delta1 = lower(rng);
        let delta2 = lower(rng);
        let symmetric = |rng: &mut R| -> Vec<u64> {
            let mut rows = vec![0u64; n];
            for i in 0..n {
                for j in 0..=i {
                    if rng.gen::<bool>() {
                        rows[i] |= 1 << j;
                        rows[j] |= 1 << i;
                    }
                }
            }
            rows
        };
        let gamma1 = symmetric(rng);
        let gamma2 = symmetric(rng);
        let pauli_x = rng.gen::<u64>() & low_mask(n);
        let pauli_z = rng.gen::<u64>() & low_mask(n);
        Self::from_parts(
            n,
            CanonicalParts {
                delta1_rows: delta1,
                gamma1_rows: gamma1,
                had,
                perm,
                delta2_rows: delta2,
                gamma2_rows: gamma2,
                pauli_x,
                pauli_z,
            },
        )
        .expect("sampled parts are valid")
    }

    pub fn from_parts(n: usize, parts: CanonicalParts) -> Result<Self> {
        let check_lower = |rows: &[u64]| {
            rows.len() == n
                && rows
                    .iter()
                    .enumerate()
                    .all(|(i, r)| r >> i & 1 == 1 && r & !low_mask(i + 1) == 0)
        };
        let check_sym = |rows: &[u64]| {
            rows.len() == n
                && (0..n).all(|i| (0..n).all(|j| (rows[i] >> j & 1) == (rows[j] >> i & 1)))
        };
        let mut seen = vec![false; n];
        let perm_ok = parts.perm.len() == n
            && parts.perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true));
        if !(check_lower(&parts.delta1_rows)
            && check_lower(&parts.delta2_rows)
            && check_sym(&parts.gamma1_rows)
            && check_sym(&parts.gamma2_rows)
            && perm_ok
            && (parts.had | parts.pauli_x | parts.pauli_z) & !low_mask(n) == 0)
        {
            return Err(Error::Input("invalid canonical-form parts".into()));
        }
        let delta1_inv = gf2_inverse(&parts.delta1_rows)?;
        let delta2_inv = gf2_inverse(&parts.delta2_rows)?;
        Ok(Self {
            n,
            delta1_inv,
            delta2_inv,
            delta1: gf2_transpose(&parts.delta1_rows, n),
            gamma1: parts.gamma1_rows,
            had: parts.had,
            perm: parts.perm,
            delta2: gf2_transpose(&parts.delta2_rows, n),
            gamma2: parts.gamma2_rows,
            pauli_x: parts.pauli_x,
            pauli_z: parts.pauli_z,
        })
    }

    fn lin_apply(cols: &[u64], x: u64) -> u64 {
        bits(x).fold(0, |acc, j| acc ^ cols[j])
    }

    fn permute(&self, m: u64) -> u64 {
        bits(m).fold(0, |acc, j| acc | (1u64 << self.perm[j]))
    }

    /// Phase exponent of `Diag(Γ)` on basis state `y`.
    fn diag_phase(gamma: &[u64], y: u64) -> u32 {
        let mut k = 0u32;
        for j in bits(y) {
            k += (gamma[j] >> j & 1) as u32;
            let above = !low_mask(j + 1);
            k += 2 * (gamma[j] & y & above).count_ones();
        }
        k
    }

    fn conj_lin(cols: &[u64], inv_rows: &[u64], p: PhasedPauli) -> PhasedPauli {
        // X^a -> X^{Ma}, Z^c -> Z^{M^{-T}c}; M^{-T}e_j is row j of M^{-1}.
        PhasedPauli {
            k: p.k,
            x: Self::lin_apply(cols, p.x),
            z: bits(p.z).fold(0, |acc, j| acc ^ inv_rows[j]),
        }
    }

    fn conj_diag(gamma: &[u64], p: PhasedPauli) -> PhasedPauli {
        let mut acc = PhasedPauli {
            k: p.k,
            x: 0,
            z: 0,
        };
        for j in bits(p.x) {
            let img = PhasedPauli {
                k: (gamma[j] >> j & 1) as u8,
                x: 1 << j,
                z: gamma[j],
            };
            acc = acc.mul(&img);
        }
        acc.mul(&PhasedPauli {
            k: 0,
            x: 0,
            z: p.z,
        })
    }

    /// `U P U†` through the layers in application order.
    fn conjugate(&self, p: PhasedPauli) -> PhasedPauli {
        let mut q = Self::conj_lin(&self.delta2, &self.delta2_inv, p);
        q = Self::conj_diag(&self.gamma2, q);
        q = PhasedPauli {
            k: q.k,
            x: self.permute(q.x),
            z: self.permute(q.z),
        };
        let both = self.had & q.x & q.z;
        q.k = ((q.k as u32 + 2 * both.count_ones()) % 4) as u8;
        let (hx, hz) = (q.x & self.had, q.z & self.had);
        q.x = (q.x & !self.had) | hz;
        q.z = (q.z & !self.had) | hx;
        q = Self::conj_lin(&self.delta1, &self.delta1_inv, q);
        q = Self::conj_diag(&self.gamma1, q);
        let anti = (q.x & self.pauli_z).count_ones() + (q.z & self.pauli_x).count_ones();
        q.k = ((q.k as u32 + 2 * anti) % 4) as u8;
        q
    }

    /// Tableau rows `U X_j U†`, `U Z_j U†`.
    pub fn tableau_rows(&self) -> Vec<PhasedPauli> {
        let n = self.n;
        let mut rows = Vec::with_capacity(2 * n);
        for j in 0..n {
            rows.push(self.conjugate(PhasedPauli {
                k: 0,
                x: 1 << j,
                z: 0,
            }));
        }
        for j in 0..n {
            rows.push(self.conjugate(PhasedPauli {
                k: 0,
                x: 0,
                z: 1 << j,
            }));
        }
        rows
    }

    /// Apply to qubits `offset..offset+n` of `amps` using `scratch` of equal length.
    fn apply(&self, amps: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>, offset: usize) {
        let n = self.n;
        let dim = 1usize << n;
        let unit = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let mut tgt = vec![0u64; dim];
        let mut ph = vec![Complex64::new(0.0, 0.0); dim];

        for x in 0..dim as u64 {
            let y = Self::lin_apply(&self.delta2, x);
            let k = Self::diag_phase(&self.gamma2, y);
            tgt[x as usize] = self.permute(y);
            ph[x as usize] = unit[(k % 4) as usize];
        }
        permute_pass(amps, scratch, &tgt, &ph, offset, n);

        for q in bits(self.had) {
            apply_h(amps, q + offset);
        }

        let qphase = (self.pauli_x & self.pauli_z).count_ones();
        for x in 0..dim as u64 {
            let y = Self::lin_apply(&self.delta1, x);
            let k = Self::diag_phase(&self.gamma1, y) + qphase + 2 * (self.pauli_z & y).count_ones();
            tgt[x as usize] = y ^ self.pauli_x;
            ph[x as usize] = unit[(k % 4) as usize];
        }
        permute_pass(amps, scratch, &tgt, &ph, offset, n);
    }
}

/// `out[idx with local bits tgt[l]] = ph[l]·in[idx with local bits l]`.
fn permute_pass(
    amps: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
    tgt: &[u64],
    ph: &[Complex64],
    offset: usize,
    k: usize,
) {
    let lm = low_mask(k) as usize;
    if offset == 0 && amps.len() == 1 << k {
        for (i, a) in amps.iter().enumerate() {
            scratch[tgt[i] as usize] = ph[i] * a;
        }
    } else {
        let hole = !(lm << offset);
        for (i, a) in amps.iter().enumerate() {
            let l = (i >> offset) & lm;
            scratch[(i & hole) | ((tgt[l] as usize) << offset)] = ph[l] * a;
        }
    }
    std::mem::swap(amps, scratch);
}

/// An `n`-qubit Clifford unitary in tableau form.
#[derive(Clone, Debug)]
pub struct CliffordElement {
    n: usize,
    rows: Vec<PhasedPauli>,
    /// `(offset, block)` pieces of a layered form, when known.
    form: Option<Arc<Vec<(usize, CanonicalForm)>>>,
}

impl PartialEq for CliffordElement {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.rows == other.rows
    }
}

impl CliffordElement {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::Input(format!("bad qubit count {n}")));
        }
        let mut rows = Vec::with_capacity(2 * n);
        rows.extend((0..n).map(|j| PhasedPauli { k: 0, x: 1 << j, z: 0 }));
        rows.extend((0..n).map(|j| PhasedPauli { k: 0, x: 0, z: 1 << j }));
        Ok(Self { n, rows, form: None })
    }

    /// Build from signed rows `(negative, string)`: images of `X_0..X_{n-1}` then `Z_0..Z_{n-1}`.
    pub fn from_rows(n: usize, rows: &[(bool, PauliString)]) -> Result<Self> {
        if rows.len() != 2 * n || rows.iter().any(|(_, p)| p.n_qubits() != n) {
            return Err(Error::Input("tableau needs 2n rows of n qubits".into()));
        }
        let el = Self {
            n,
            rows: rows.iter().map(|(s, p)| PhasedPauli::from_string(p, *s)).collect(),
            form: None,
        };
        if !el.is_symplectic() {
            return Err(Error::Input("rows do not form a symplectic tableau".into()));
        }
        Ok(el)
    }

    /// Tableau of a Clifford circuit (first gate applied first).
    pub fn from_circuit(n: usize, gates: &[Gate]) -> Result<Self> {
        let mut el = Self::identity(n)?;
        for g in gates {
            for q in g.support() {
                if q >= n {
                    return Err(Error::Input(format!("gate {g:?} outside {n} qubits")));
                }
            }
            for r in el.rows.iter_mut() {
                *r = conjugate_by_gate(*r, g)?;
            }
        }
        Ok(el)
    }

    /// Single-qubit Hadamard as an `n`-qubit element.
    pub fn hadamard(n: usize, q: usize) -> Result<Self> {
        Self::from_circuit(n, &[Gate::H(q)])
    }

    fn from_form(n: usize, blocks: Vec<(usize, CanonicalForm)>) -> Self {
        let mut rows = vec![PhasedPauli::IDENTITY; 2 * n];
        for (off, f) in &blocks {
            let k = f.n;
            for (j, r) in f.tableau_rows().into_iter().enumerate() {
                let shifted = PhasedPauli {
                    k: r.k,
                    x: r.x << off,
                    z: r.z << off,
                };
                let idx = if j < k { off + j } else { n + off + (j - k) };
                rows[idx] = shifted;
            }
        }
        Self {
            n,
            rows,
            form: Some(Arc::new(blocks)),
        }
    }

    pub fn from_canonical(form: CanonicalForm) -> Self {
        let n = form.n;
        Self::from_form(n, vec![(0, form)])
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[PhasedPauli] {
        &self.rows
    }

    pub fn has_layered_form(&self) -> bool {
        self.form.is_some()
    }

    /// Signed letter rows.
    pub fn signed_rows(&self) -> Vec<(bool, PauliString)> {
        self.rows
            .iter()
            .map(|r| r.to_signed(self.n).expect("tableau rows are Hermitian"))
            .collect()
    }

    /// Check the GF(2) symplectic form and Hermitian rows.
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        let sym = |a: &PhasedPauli, b: &PhasedPauli| {
            ((a.x & b.z).count_ones() + (a.z & b.x).count_ones()) % 2
        };
        for i in 0..2 * n {
            if !self.rows[i].letter_phase().is_real() {
                return false;
            }
            for j in 0..2 * n {
                let expect = if (i < n && j == i + n) || (i >= n && i == j + n) {
                    1
                } else {
                    0
                };
                if sym(&self.rows[i], &self.rows[j]) != expect {
                    return false;
                }
            }
        }
        true
    }

    /// `U P U†` for a raw Pauli.
    #[inline]
    pub fn conjugate_raw(&self, p: &PhasedPauli) -> PhasedPauli {
        let mut acc = PhasedPauli {
            k: p.k,
            x: 0,
            z: 0,
        };
        for j in bits(p.x) {
            acc = acc.mul(&self.rows[j]);
        }
        for j in bits(p.z) {
            acc = acc.mul(&self.rows[self.n + j]);
        }
        acc
    }

    /// Tableau of `self · other` (apply `other` first).
    pub fn compose(&self, other: &CliffordElement) -> Result<CliffordElement> {
        if self.n != other.n {
            return Err(Error::Input("qubit count mismatch".into()));
        }
        Ok(CliffordElement {
            n: self.n,
            rows: other.rows.iter().map(|r| self.conjugate_raw(r)).collect(),
            form: None,
        })
    }

    /// Tableau of `U†`.
    pub fn inverse(&self) -> CliffordElement {
        let n = self.n;
        // Binary part: T^{-1} = Ω Tᵀ Ω with Ω swapping the X and Z halves.
        let row_bit = |r: usize, c: usize| -> u64 {
            let p = &self.rows[r];
            if c < n {
                p.x >> c & 1
            } else {
                p.z >> (c - n) & 1
            }
        };
        let omega = |i: usize| if i < n { i + n } else { i - n };
        let mut rows = Vec::with_capacity(2 * n);
        for r in 0..2 * n {
            let (mut x, mut z) = (0u64, 0u64);
            for c in 0..2 * n {
                if row_bit(omega(c), omega(r)) == 1 {
                    if c < n {
                        x |= 1 << c;
                    } else {
                        z |= 1 << (c - n);
                    }
                }
            }
            let mut cand = PhasedPauli {
                k: ((x & z).count_ones() % 4) as u8,
                x,
                z,
            };
            let img = self.conjugate_raw(&cand);
            let generator = if r < n {
                PhasedPauli { k: 0, x: 1 << r, z: 0 }
            } else {
                PhasedPauli { k: 0, x: 0, z: 1 << (r - n) }
            };
            debug_assert_eq!((img.x, img.z), (generator.x, generator.z));
            if img.k != generator.k {
                cand.k = (cand.k + 2) % 4;
            }
            rows.push(cand);
        }
        CliffordElement { n, rows, form: None }
    }

    /// `U P U†` as `(sign, string)`.
    pub fn conjugate_pauli(&self, p: &PauliString) -> Result<(i8, PauliString)> {
        if p.n_qubits() != self.n {
            return Err(Error::Input(format!(
                "Pauli on {} qubits, Clifford on {}",
                p.n_qubits(),
                self.n
            )));
        }
        let img = self.conjugate_raw(&PhasedPauli::from_string(p, false));
        let (neg, s) = img.to_signed(self.n)?;
        Ok((if neg { -1 } else { 1 }, s))
    }

    /// Rows restricted to qubits `offset..offset+len` of a tensor-product element.
    pub fn restrict(&self, offset: usize, len: usize) -> Result<CliffordElement> {
        if offset + len > self.n {
            return Err(Error::Input("block outside register".into()));
        }
        let m = low_mask(len);
        let mut rows = Vec::with_capacity(2 * len);
        for half in 0..2 {
            for j in 0..len {
                let r = self.rows[half * self.n + offset + j];
                if (r.x | r.z) & !(m << offset) != 0 {
                    return Err(Error::Input(
                        "element does not factor on the requested block".into(),
                    ));
                }
                rows.push(PhasedPauli {
                    k: r.k,
                    x: (r.x >> offset) & m,
                    z: (r.z >> offset) & m,
                });
            }
        }
        Ok(CliffordElement {
            n: len,
            rows,
            form: None,
        })
    }

    /// Clifford circuit realizing this tableau (first gate applied first).
    pub fn synthesize(&self) -> Vec<Gate> {
        let n = self.n;
        let mut t = self.clone();
        let mut ops: Vec<Gate> = Vec::new();
        let mut push = |g: Gate, t: &mut CliffordElement| {
            for r in t.rows.iter_mut() {
                *r = conjugate_by_gate(*r, &g).expect("Clifford gate");
            }
            ops.push(g);
        };
        for i in 0..n {
            // Make row X_i equal ±X_i.
            let r = t.rows[i];
            if r.x >> i & 1 == 0 {
                if let Some(k) = (i..n).find(|&k| r.x >> k & 1 == 1) {
                    push(Gate::Swap(i, k), &mut t);
                } else {
                    let k = (i..n).find(|&k| r.z >> k & 1 == 1).expect("nonzero row");
                    push(Gate::H(k), &mut t);
                    if k != i {
                        push(Gate::Swap(i, k), &mut t);
                    }
                }
            }
            for k in i + 1..n {
                if t.rows[i].x >> k & 1 == 1 {
                    push(Gate::Cnot { control: i, target: k }, &mut t);
                }
            }
            if t.rows[i].z >> i & 1 == 1 {
                push(Gate::S(i), &mut t);
            }
            for k in i + 1..n {
                if t.rows[i].z >> k & 1 == 1 {
                    push(Gate::Cz(i, k), &mut t);
                }
            }
            // Make row Z_i equal ±Z_i while keeping X_i fixed.
            if t.rows[n + i].x >> i & 1 == 1 {
                push(Gate::H(i), &mut t);
                push(Gate::S(i), &mut t);
                push(Gate::H(i), &mut t);
            }
            for k in i + 1..n {
                let r = t.rows[n + i];
                let (xk, zk) = (r.x >> k & 1 == 1, r.z >> k & 1 == 1);
                if xk && zk {
                    push(Gate::S(k), &mut t);
                }
                if xk {
                    push(Gate::H(k), &mut t);
                }
                if xk || zk {
                    push(Gate::Cnot { control: k, target: i }, &mut t);
                }
            }
        }
        // Remaining tableau is a Pauli: row X_j negative iff Z_j present.
        let mut circuit = Vec::new();
        for j in 0..n {
            let xneg = t.rows[j].k == 2;
            let zneg = t.rows[n + j].k == 2;
            match (xneg, zneg) {
                (true, true) => circuit.push(Gate::Y(j)),
                (true, false) => circuit.push(Gate::Z(j)),
                (false, true) => circuit.push(Gate::X(j)),
                _ => {}
            }
        }
        for g in ops.into_iter().rev() {
            circuit.push(match g {
                Gate::S(q) => Gate::Sdg(q),
                Gate::Sdg(q) => Gate::S(q),
                other => other,
            });
        }
        circuit
    }

    /// Apply `U` to qubits `offset..offset+n` of raw amplitudes.
    pub fn apply_to_amplitudes(&self, amps: &mut Vec<Complex64>, offset: usize) -> Result<()> {
        let total = amps.len().trailing_zeros() as usize;
        if offset + self.n > total {
            return Err(Error::Input(format!(
                "Clifford on {} qubits at offset {offset} exceeds {total}-qubit state",
                self.n
            )));
        }
        match &self.form {
            Some(blocks) => {
                let mut scratch = vec![Complex64::new(0.0, 0.0); amps.len()];
                for (off, f) in blocks.iter() {
                    f.apply(amps, &mut scratch, offset + off);
                }
            }
            None => {
                let gates: Vec<Gate> = self
                    .synthesize()
                    .into_iter()
                    .map(|g| shift_gate(g, offset))
                    .collect();
                apply_gates_in_place(amps, total, &gates)?;
            }
        }
        Ok(())
    }

    /// Apply to a state of exactly `n` qubits.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.n_qubits() != self.n {
            return Err(Error::Input("size mismatch".into()));
        }
        let mut a = psi.amplitudes().to_vec();
        self.apply_to_amplitudes(&mut a, 0)?;
        StateVector::new(self.n, a)
    }

    /// Dense unitary, column `x` is `U|x⟩`.
    pub fn to_dense(&self) -> Result<nalgebra::DMatrix<Complex64>> {
        if self.n > 10 {
            return Err(Error::Resource("dense Clifford limited to 10 qubits".into()));
        }
        let dim = 1usize << self.n;
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for x in 0..dim {
            let mut a = vec![Complex64::new(0.0, 0.0); dim];
            a[x] = Complex64::new(1.0, 0.0);
            self.apply_to_amplitudes(&mut a, 0)?;
            m.column_mut(x).copy_from_slice(&a);
        }
        Ok(m)
    }

    /// Tableau bits, row-major: each row is `x` bits, `z` bits, sign bit.
    pub fn to_bit_string(&self) -> String {
        let mut s = String::with_capacity(2 * self.n * (2 * self.n + 2));
        for (i, r) in self.signed_rows().iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            for q in 0..self.n {
                s.push(if r.1.x_mask() >> q & 1 == 1 { '1' } else { '0' });
            }
            for q in 0..self.n {
                s.push(if r.1.z_mask() >> q & 1 == 1 { '1' } else { '0' });
            }
            s.push(if r.0 { '1' } else { '0' });
        }
        s
    }

    pub fn from_bit_rows(n: usize, rows: &[&str]) -> Result<Self> {
        if rows.len() != 2 * n {
            return Err(Error::Parse(format!("expected {} tableau rows", 2 * n)));
        }
        let mut out = Vec::with_capacity(2 * n);
        for r in rows {
            let b = r.as_bytes();
            if b.len() != 2 * n + 1 || b.iter().any(|c| *c != b'0' && *c != b'1') {
                return Err(Error::Parse(format!("bad tableau row {r:?}")));
            }
            let (mut x, mut z) = (0u64, 0u64);
            for q in 0..n {
                x |= ((b[q] - b'0') as u64) << q;
                z |= ((b[n + q] - b'0') as u64) << q;
            }
            out.push((b[2 * n] == b'1', PauliString::from_masks(n, x, z)?));
        }
        Self::from_rows(n, &out)
    }
}

fn shift_gate(g: Gate, off: usize) -> Gate {
    match g {
        Gate::H(q) => Gate::H(q + off),
        Gate::X(q) => Gate::X(q + off),
        Gate::Y(q) => Gate::Y(q + off),
        Gate::Z(q) => Gate::Z(q + off),
        Gate::S(q) => Gate::S(q + off),
        Gate::Sdg(q) => Gate::Sdg(q + off),
        Gate::Cnot { control, target } => Gate::Cnot {
            control: control + off,
            target: target + off,
        },
        Gate::Cz(a, b) => Gate::Cz(a + off, b + off),
        Gate::Swap(a, b) => Gate::Swap(a + off, b + off),
        other => other,
    }
}

/// Depth of a gate list under as-soon-as-possible scheduling.
pub fn circuit_depth(n: usize, gates: &[Gate]) -> usize {
    let mut level = vec![0usize; n.max(1)];
    for g in gates {
        let qs = g.support();
        let d = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for q in qs {
            level[q] = d;
        }
    }
    level.into_iter().max().unwrap_or(0)
}

/// Uniformly random `n`-qubit Clifford.
pub fn random_clifford<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CliffordElement> {
    if n == 0 || n > 64 {
        return Err(Error::Input(format!("bad qubit count {n}")));
    }
    Ok(CliffordElement::from_canonical(CanonicalForm::sample(n, rng)))
}

/// Tensor product of uniform Cliffords on consecutive blocks of `k` qubits
/// (the last block may be smaller).
pub fn random_local_clifford<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<CliffordElement> {
    if n == 0 || n > 64 || k == 0 {
        return Err(Error::Input(format!("bad local Clifford sizes n={n} k={k}")));
    }
    let blocks = (0..n)
        .step_by(k)
        .map(|off| (off, CanonicalForm::sample(k.min(n - off), rng)))
        .collect();
    Ok(CliffordElement::from_form(n, blocks))
}

/// Order of the `n`-qubit Clifford group modulo phase: `2^{n²+2n} Π_j (4^j − 1)`.
pub fn clifford_group_order(n: u32) -> u128 {
    let mut v: u128 = 1u128 << (n * n + 2 * n);
    for j in 1..=n {
        v *= 4u128.pow(j) - 1;
    }
    v
}

/// Apply `u` to the first `u.n` qubits of `psi` and sample those qubits in the Z basis.
pub fn measure_z<R: Rng + ?Sized>(
    u: &CliffordElement,
    psi: &StateVector,
    rng: &mut R,
) -> Result<u64> {
    if u.n > psi.n_qubits() {
        return Err(Error::Input(format!(
            "Clifford on {} qubits, state on {}",
            u.n,
            psi.n_qubits()
        )));
    }
    let mut a = psi.amplitudes().to_vec();
    u.apply_to_amplitudes(&mut a, 0)?;
    Ok(sample_index(&a, rng) & low_mask(u.n))
}

/// Per-snapshot seed derived from the master seed and snapshot index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(index))
}

/// Clifford ensemble used for snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locality {
    Global,
    /// Tensor products of uniform Cliffords on blocks of `k` qubits.
    Local(usize),
}

/// One measurement record `(U, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub unitary: CliffordElement,
    pub outcome: u64,
    pub seed: u64,
}

/// Seeded collection of snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowSet {
    pub n_qubits: usize,
    pub locality: Locality,
    pub snapshots: Vec<Snapshot>,
    pub source_label: String,
    pub master_seed: u64,
}

/// Options for [`collect_shadow_with`].
#[derive(Clone, Debug)]
pub struct ShadowOptions {
    pub locality: Locality,
    /// Measure only the first `register_qubits` qubits; `None` measures all.
    pub register_qubits: Option<usize>,
    pub label: String,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            locality: Locality::Global,
            register_qubits: None,
            label: String::new(),
        }
    }
}

/// Draw the snapshot with the given seed.
pub fn snapshot_from_seed(
    psi: &StateVector,
    n: usize,
    locality: Locality,
    seed: u64,
) -> Result<Snapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unitary = match locality {
        Locality::Global => random_clifford(n, &mut rng)?,
        Locality::Local(k) => random_local_clifford(n, k, &mut rng)?,
    };
    let outcome = measure_z(&unitary, psi, &mut rng)?;
    Ok(Snapshot {
        unitary,
        outcome,
        seed,
    })
}

/// `m` global snapshots of `psi` seeded from `master_seed`.
pub fn collect_shadow(psi: &StateVector, m: usize, master_seed: u64) -> Result<ShadowSet> {
    collect_shadow_with(psi, m, master_seed, &ShadowOptions::default())
}

pub fn collect_shadow_with(
    psi: &StateVector,
    m: usize,
    master_seed: u64,
    opts: &ShadowOptions,
) -> Result<ShadowSet> {
    if m == 0 {
        return Err(Error::Input("shadow size must be >= 1".into()));
    }
    let n = opts.register_qubits.unwrap_or(psi.n_qubits());
    if n == 0 || n > psi.n_qubits() {
        return Err(Error::Input(format!("bad register size {n}")));
    }
    if let Locality::Local(0) = opts.locality {
        return Err(Error::Input("block size must be >= 1".into()));
    }
    let snapshots = (0..m as u64)
        .map(|i| snapshot_from_seed(psi, n, opts.locality, derive_seed(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShadowSet {
        n_qubits: n,
        locality: opts.locality,
        snapshots,
        source_label: opts.label.clone(),
        master_seed,
    })
}

impl ShadowSet {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Text dump: a header line, then per snapshot `seed outcome row row ...`.
    pub fn to_text(&self) -> String {
        let loc = match self.locality {
            Locality::Global => "global".to_string(),
            Locality::Local(k) => format!("local:{k}"),
        };
        let mut s = format!(
            "shadowset n={} locality={} master_seed={} count={} label={}\n",
            self.n_qubits,
            loc,
            self.master_seed,
            self.snapshots.len(),
            self.source_label.replace(char::is_whitespace, "_")
        );
        for snap in &self.snapshots {
            let outcome: String = (0..self.n_qubits)
                .map(|q| if snap.outcome >> q & 1 == 1 { '1' } else { '0' })
                .collect();
            let _ = writeln!(s, "{} {} {}", snap.seed, outcome, snap.unitary.to_bit_string());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty shadow file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("shadowset") {
            return Err(Error::Parse("missing shadowset header".into()));
        }
        let (mut n, mut loc, mut seed, mut count, mut label) = (None, None, None, None, String::new());
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {f:?}")))?;
            let perr = |e: std::num::ParseIntError| Error::Parse(e.to_string());
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(perr)?),
                "locality" => {
                    loc = Some(if v == "global" {
                        Locality::Global
                    } else if let Some(k) = v.strip_prefix("local:") {
                        Locality::Local(k.parse().map_err(perr)?)
                    } else {
                        return Err(Error::Parse(format!("bad locality {v:?}")));
                    })
                }
                "master_seed" => seed = Some(v.parse::<u64>().map_err(perr)?),
                "count" => count = Some(v.parse::<usize>().map_err(perr)?),
                "label" => label = v.to_string(),
                _ => return Err(Error::Parse(format!("unknown header key {k:?}"))),
            }
        }
        let (Some(n), Some(locality), Some(master_seed), Some(count)) = (n, loc, seed, count) else {
            return Err(Error::Parse("incomplete shadowset header".into()));
        };
        let mut snapshots = Vec::with_capacity(count);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 + 2 * n {
                return Err(Error::Parse(format!("bad snapshot line {line:?}")));
            }
            let seed = parts[0].parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?;
            if parts[1].len() != n {
                return Err(Error::Parse("outcome length mismatch".into()));
            }
            let mut outcome = 0u64;
            for (q, c) in parts[1].bytes().enumerate() {
                match c {
                    b'0' => {}
                    b'1' => outcome |= 1 << q,
                    _ => return Err(Error::Parse("bad outcome bit".into())),
                }
            }
            let unitary = CliffordElement::from_bit_rows(n, &parts[2..])?;
            snapshots.push(Snapshot {
                unitary,
                outcome,
                seed,
            });
        }
        if snapshots.len() != count {
            return Err(Error::Parse(format!(
                "header count {count} but {} snapshots",
                snapshots.len()
            )));
        }
        Ok(Self {
            n_qubits: n,
            locality,
            snapshots,
            source_label: label,
            master_seed,
        })
    }
}

/// Phase of a raw Pauli as a complex number; exposed for oracle tests.
pub fn raw_phase(p: &PhasedPauli) -> Complex64 {
    Phase::from_exponent(p.k as u32).to_complex()
}
