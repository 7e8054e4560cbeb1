//! Pauli-string algebra, Pauli-sum Hamiltonians and the benchmark families.
//!
//! Qubit `j` of an `n`-qubit string is bit `j` of the `x`/`z` masks and bit `j`
//! of a computational-basis index. The text form lists qubit 0 first, so
//! `"XZ"` is `X` on qubit 0 and `Z` on qubit 1. Strings hold up to 64 qubits.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported qubit count for a Pauli string.
pub const MAX_QUBITS: usize = 64;

/// Power of `i` as a global phase: `Phase(k)` is `i^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: u32) -> Phase {
        Phase((k % 4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    fn to_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// Tensor product of Pauli letters (no phase).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_masks(n, 0, 0)
    }

    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Input(format!(
                "qubit count {n} outside 1..={MAX_QUBITS}"
            )));
        }
        if (x | z) & !mask(n) != 0 {
            return Err(Error::Input(format!("mask has bits beyond {n} qubits")));
        }
        Ok(Self { n, x, z })
    }

    /// One letter on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, letter: Letter) -> Result<Self> {
        if q >= n {
            return Err(Error::Input(format!("qubit {q} out of range for n={n}")));
        }
        let (bx, bz) = letter.bits();
        Self::from_masks(n, (bx as u64) << q, (bz as u64) << q)
    }

    /// Product of the given letters on the given qubits.
    pub fn from_letters(n: usize, ops: &[(usize, Letter)]) -> Result<Self> {
        let mut s = Self::identity(n)?;
        for &(q, l) in ops {
            if q >= n {
                return Err(Error::Input(format!("qubit {q} out of range for n={n}")));
            }
            let (bx, bz) = l.bits();
            s.x = (s.x & !(1 << q)) | ((bx as u64) << q);
            s.z = (s.z & !(1 << q)) | ((bz as u64) << q);
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn letter(&self, q: usize) -> Letter {
        Letter::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// True if the string is a product of `I` and `Z` only.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Place this string on qubits `offset..offset+n` of an `n_total`-qubit register.
    pub fn embed(&self, n_total: usize, offset: usize) -> Result<Self> {
        if offset + self.n > n_total {
            return Err(Error::Input(format!(
                "cannot embed {} qubits at offset {offset} into {n_total}",
                self.n
            )));
        }
        Self::from_masks(n_total, self.x << offset, self.z << offset)
    }

    /// Letters on qubits `offset..offset+len` as a `len`-qubit string.
    pub fn restrict(&self, offset: usize, len: usize) -> Result<Self> {
        let m = mask(len);
        Self::from_masks(len, (self.x >> offset) & m, (self.z >> offset) & m)
    }

    /// Action on a basis state: `P|i> = phase(i) |i ^ x>`.
    #[inline]
    pub fn apply_to_basis(&self, index: u64) -> (Complex64, u64) {
        let k = self.y_count() + 2 * (self.z & index).count_ones();
        (Phase::from_exponent(k).to_complex(), index ^ self.x)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.letter(q).to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let n = s.chars().count();
        let mut out = Self::identity(n)?;
        for (q, c) in s.chars().enumerate() {
            let l = match c.to_ascii_uppercase() {
                'I' => Letter::I,
                'X' => Letter::X,
                'Y' => Letter::Y,
                'Z' => Letter::Z,
                other => return Err(Error::Parse(format!("bad Pauli letter {other:?}"))),
            };
            let (bx, bz) = l.bits();
            out.x |= (bx as u64) << q;
            out.z |= (bz as u64) << q;
        }
        Ok(out)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Multiply two strings: `a·b = phase·result`.
pub fn pauli_multiply(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
    if a.n != b.n {
        return Err(Error::Input(format!(
            "length mismatch: {} vs {}",
            a.n, b.n
        )));
    }
    let x = a.x ^ b.x;
    let z = a.z ^ b.z;
    // Letter form: P = i^{|x&z|} X^x Z^z.
    let k = a.y_count() + b.y_count() + 2 * (a.z & b.x).count_ones() + 4 * 64
        - (x & z).count_ones();
    Ok((Phase::from_exponent(k), PauliString { n: a.n, x, z }))
}

/// Pauli operator in raw form `i^k X^x Z^z`, used for phase-tracked products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub k: u8,
    pub x: u64,
    pub z: u64,
}

impl PhasedPauli {
    pub const IDENTITY: PhasedPauli = PhasedPauli { k: 0, x: 0, z: 0 };

    /// `sign · P` for a letter string `P`.
    pub fn from_string(p: &PauliString, negative: bool) -> Self {
        let k = p.y_count() + if negative { 2 } else { 0 };
        PhasedPauli {
            k: (k % 4) as u8,
            x: p.x,
            z: p.z,
        }
    }

    #[inline]
    pub fn mul(&self, rhs: &PhasedPauli) -> PhasedPauli {
        let k = self.k as u32 + rhs.k as u32 + 2 * (self.z & rhs.x).count_ones();
        PhasedPauli {
            k: (k % 4) as u8,
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
        }
    }

    /// Phase relative to the letter string, `i^k X^x Z^z = phase · letters`.
    #[inline]
    pub fn letter_phase(&self) -> Phase {
        Phase::from_exponent(self.k as u32 + 4 - (self.x & self.z).count_ones() % 4)
    }

    /// Split into `(negative, letters)`; fails if the phase is imaginary.
    pub fn to_signed(&self, n: usize) -> Result<(bool, PauliString)> {
        let ph = self.letter_phase();
        if !ph.is_real() {
            return Err(Error::Numerical(
                "Pauli product has imaginary phase".into(),
            ));
        }
        Ok((ph == Phase::MINUS_ONE, PauliString::from_masks(n, self.x, self.z)?))
    }
}

/// A real coefficient times a Pauli string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, string: PauliString) -> Self {
        Self {
            coefficient,
            string,
        }
    }
}

/// Merge duplicate strings, keeping first-occurrence order and dropping exact zeros.
fn merge_terms(terms: impl IntoIterator<Item = PauliTerm>) -> Vec<PauliTerm> {
    let mut index: HashMap<PauliString, usize> = HashMap::new();
    let mut out: Vec<PauliTerm> = Vec::new();
    for t in terms {
        match index.get(&t.string) {
            Some(&i) => out[i].coefficient += t.coefficient,
            None => {
                index.insert(t.string, out.len());
                out.push(t);
            }
        }
    }
    out.retain(|t| t.coefficient != 0.0);
    out
}

/// Weighted sum of Pauli strings on `n_qubits`, with the rescaling factor applied so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    scale: f64,
}

impl Hamiltonian {
    /// Build from terms; duplicates are merged.
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        Self::with_scale(n_qubits, terms, 1.0)
    }

    pub fn with_scale(n_qubits: usize, terms: Vec<PauliTerm>, scale: f64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Input(format!("bad qubit count {n_qubits}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Input(format!("scale must be positive, got {scale}")));
        }
        for t in &terms {
            if t.string.n_qubits() != n_qubits {
                return Err(Error::Input(format!(
                    "term {} has {} qubits, expected {n_qubits}",
                    t.string,
                    t.string.n_qubits()
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::Input(format!("non-finite coefficient on {}", t.string)));
            }
        }
        let terms = merge_terms(terms);
        if terms.is_empty() {
            return Err(Error::Input("Hamiltonian has no nonzero terms".into()));
        }
        Ok(Self {
            n_qubits,
            terms,
            scale,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.string.is_diagonal())
    }

    /// True when the matrix is real (every term has an even number of `Y`).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.string.y_count() % 2 == 0)
    }

    /// Eigenvalue of a diagonal Hamiltonian on basis state `index`.
    pub fn diagonal_energy(&self, index: u64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.string.is_diagonal())
            .map(|t| {
                if (t.string.z_mask() & index).count_ones().is_multiple_of(2) {
                    t.coefficient
                } else {
                    -t.coefficient
                }
            })
            .sum()
    }

    /// Serialize to the text format: header `n=<int> scale=<float>`, then `<coef> <string>` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("n={} scale={}\n", self.n_qubits, self.scale);
        for t in &self.terms {
            s.push_str(&format!("{} {}\n", t.coefficient, t.string));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty Hamiltonian file".into()))?;
        let mut n = None;
        let mut scale = 1.0;
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
            match k {
                "n" => {
                    n = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                "scale" => scale = v.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?,
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("header lacks n=".into()))?;
        let mut terms = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let (Some(c), Some(p), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse(format!("bad term line {line:?}")));
            };
            let coefficient = c.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?;
            let string: PauliString = p.parse()?;
            terms.push(PauliTerm::new(coefficient, string));
        }
        Self::with_scale(n, terms, scale)
    }
}

/// General Pauli-sum observable with merged terms; may be empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Ok(Self {
            n_qubits,
            terms: vec![PauliTerm::new(1.0, PauliString::identity(n_qubits)?)],
        })
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.string.n_qubits() != n_qubits) {
            return Err(Error::Input("term length mismatch".into()));
        }
        Ok(Self {
            n_qubits,
            terms: merge_terms(terms),
        })
    }

    pub fn from_hamiltonian(h: &Hamiltonian) -> Self {
        Self {
            n_qubits: h.n_qubits,
            terms: h.terms.clone(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Product `self · rhs`, failing with a resource error above `cap` merged terms.
    ///
    /// Products of Hermitian sums can pick up imaginary coefficients on
    /// anticommuting pairs; those cancel for powers of a single Hermitian sum
    /// and the real parts are kept. Imaginary residue above `1e-9` relative is an error.
    pub fn multiply(&self, rhs: &PauliSum, cap: usize) -> Result<PauliSum> {
        if self.n_qubits != rhs.n_qubits {
            return Err(Error::Input("qubit count mismatch".into()));
        }
        let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
        let mut order: Vec<PauliString> = Vec::new();
        for a in &self.terms {
            for b in &rhs.terms {
                let (ph, s) = pauli_multiply(&a.string, &b.string)?;
                let v = ph.to_complex() * (a.coefficient * b.coefficient);
                match acc.get_mut(&s) {
                    Some(c) => *c += v,
                    None => {
                        acc.insert(s, v);
                        order.push(s);
                        if order.len() > cap {
                            return Err(Error::Resource(format!(
                                "Pauli expansion exceeds {cap} terms; use exact mode"
                            )));
                        }
                    }
                }
            }
        }
        let scale: f64 = acc.values().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let mut terms = Vec::with_capacity(order.len());
        for s in order {
            let c = acc[&s];
            if c.im.abs() > 1e-9 * scale {
                return Err(Error::Numerical(format!(
                    "non-Hermitian product: imaginary coefficient {} on {s}",
                    c.im
                )));
            }
            if c.re != 0.0 {
                terms.push(PauliTerm::new(c.re, s));
            }
        }
        Ok(PauliSum {
            n_qubits: self.n_qubits,
            terms,
        })
    }

    /// `self + factor · rhs`.
    pub fn add_scaled(&self, rhs: &PauliSum, factor: f64) -> Result<PauliSum> {
        if self.n_qubits != rhs.n_qubits {
            return Err(Error::Input("qubit count mismatch".into()));
        }
        let terms = self
            .terms
            .iter()
            .cloned()
            .chain(
                rhs.terms
                    .iter()
                    .map(|t| PauliTerm::new(t.coefficient * factor, t.string)),
            )
            .collect::<Vec<_>>();
        Ok(PauliSum {
            n_qubits: self.n_qubits,
            terms: merge_terms(terms),
        })
    }

    /// Identity-pad every term onto qubits `offset..` of a larger register.
    pub fn embed(&self, n_total: usize, offset: usize) -> Result<PauliSum> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(PauliTerm::new(t.coefficient, t.string.embed(n_total, offset)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliSum {
            n_qubits: n_total,
            terms,
        })
    }
}

/// Ising boundary condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// `H(x) = Σ_i x_i + m·Σ_{i<j} x_i x_j` with `x_i = (I − Z_i)/2`.
///
/// `pair_multiplier` is 1 for unordered pairs and 2 for ordered pairs `i≠j`.
pub fn ham_diagonal_with(n: usize, pair_multiplier: f64) -> Result<Hamiltonian> {
    if n == 0 {
        return Err(Error::Input("diagonal Hamiltonian needs n >= 1".into()));
    }
    let id = PauliString::identity(n)?;
    let z = |q: usize| PauliString::single(n, q, Letter::Z);
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(PauliTerm::new(0.5, id));
        terms.push(PauliTerm::new(-0.5, z(i)?));
    }
    for i in 0..n {
        for j in i + 1..n {
            let w = 0.25 * pair_multiplier;
            terms.push(PauliTerm::new(w, id));
            terms.push(PauliTerm::new(-w, z(i)?));
            terms.push(PauliTerm::new(-w, z(j)?));
            terms.push(PauliTerm::new(
                w,
                PauliString::from_letters(n, &[(i, Letter::Z), (j, Letter::Z)])?,
            ));
        }
    }
    Hamiltonian::new(n, terms)
}

/// Diagonal benchmark with unordered pairs.
pub fn ham_diagonal(n: usize) -> Result<Hamiltonian> {
    ham_diagonal_with(n, 1.0)
}

/// Transverse-field Ising chain `Σ Z_i Z_{i+1} + Σ X_i`.
pub fn ham_ising_with(n: usize, boundary: Boundary) -> Result<Hamiltonian> {
    if n < 2 {
        return Err(Error::Input("Ising chain needs n >= 2".into()));
    }
    let bonds = match boundary {
        Boundary::Periodic => n,
        Boundary::Open => n - 1,
    };
    let mut terms = Vec::new();
    for i in 0..bonds {
        let j = (i + 1) % n;
        terms.push(PauliTerm::new(
            1.0,
            PauliString::from_letters(n, &[(i, Letter::Z), (j, Letter::Z)])?,
        ));
    }
    for i in 0..n {
        terms.push(PauliTerm::new(1.0, PauliString::single(n, i, Letter::X)?));
    }
    Hamiltonian::new(n, terms)
}

/// Periodic transverse-field Ising chain.
pub fn ham_ising(n: usize) -> Result<Hamiltonian> {
    ham_ising_with(n, Boundary::Periodic)
}

/// Site index of grid cell `(row, col)` in snake order.
fn snake_site(row: usize, col: usize, n_b: usize) -> usize {
    if row.is_multiple_of(2) {
        row * n_b + col
    } else {
        row * n_b + (n_b - 1 - col)
    }
}

/// Fermi-Hubbard model on an `n_a × n_b` open grid under Jordan-Wigner.
///
/// Qubit `2s` is site `s` spin up and `2s+1` is spin down, sites in snake order.
pub fn ham_hubbard_jw(n_a: usize, n_b: usize, t: f64, u: f64) -> Result<Hamiltonian> {
    if n_a == 0 || n_b == 0 || n_a * n_b < 2 {
        return Err(Error::Input(format!(
            "Hubbard grid {n_a}x{n_b} needs at least two sites"
        )));
    }
    let sites = n_a * n_b;
    let n = 2 * sites;
    if n > MAX_QUBITS {
        return Err(Error::Input(format!("{n} qubits exceeds {MAX_QUBITS}")));
    }
    let mut bonds = Vec::new();
    for r in 0..n_a {
        for c in 0..n_b {
            let s = snake_site(r, c, n_b);
            if c + 1 < n_b {
                bonds.push((s, snake_site(r, c + 1, n_b)));
            }
            if r + 1 < n_a {
                bonds.push((s, snake_site(r + 1, c, n_b)));
            }
        }
    }
    let mut terms = Vec::new();
    if t != 0.0 {
        for &(a, b) in &bonds {
            for spin in 0..2 {
                let (p, q) = {
                    let (p, q) = (2 * a + spin, 2 * b + spin);
                    (p.min(q), p.max(q))
                };
                let chain: Vec<(usize, Letter)> = (p + 1..q).map(|k| (k, Letter::Z)).collect();
                for l in [Letter::X, Letter::Y] {
                    let mut ops = chain.clone();
                    ops.push((p, l));
                    ops.push((q, l));
                    terms.push(PauliTerm::new(-t / 2.0, PauliString::from_letters(n, &ops)?));
                }
            }
        }
    }
    if u != 0.0 {
        let id = PauliString::identity(n)?;
        for s in 0..sites {
            let (up, dn) = (2 * s, 2 * s + 1);
            let w = u / 4.0;
            terms.push(PauliTerm::new(w, id));
            terms.push(PauliTerm::new(-w, PauliString::single(n, up, Letter::Z)?));
            terms.push(PauliTerm::new(-w, PauliString::single(n, dn, Letter::Z)?));
            terms.push(PauliTerm::new(
                w,
                PauliString::from_letters(n, &[(up, Letter::Z), (dn, Letter::Z)])?,
            ));
        }
    }
    Hamiltonian::new(n, terms)
}

/// Divide by `s = one_norm/(1−delta)` so the spectrum lies in `[−1+delta, 1−delta]`.
pub fn rescale(h: &Hamiltonian, delta: f64) -> Result<Hamiltonian> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!("delta must be in (0,1), got {delta}")));
    }
    let norm = h.one_norm();
    if norm <= 0.0 {
        return Err(Error::Input("cannot rescale a zero Hamiltonian".into()));
    }
    let s = norm / (1.0 - delta);
    let terms = h
        .terms
        .iter()
        .map(|t| PauliTerm::new(t.coefficient / s, t.string))
        .collect();
    Hamiltonian::with_scale(h.n_qubits, terms, h.scale * s)
}

/// Dense matrix of a Pauli sum, refusing more than `limit` qubits.
pub fn terms_to_matrix(n: usize, terms: &[PauliTerm], limit: usize) -> Result<DMatrix<Complex64>> {
    if n > limit {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the dense limit {limit}"
        )));
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for t in terms {
        for col in 0..dim as u64 {
            let (ph, row) = t.string.apply_to_basis(col);
            m[(row as usize, col as usize)] += ph * t.coefficient;
        }
    }
    Ok(m)
}

/// Dense matrix `Σ c_i P_i` under the default single-register limit of 12 qubits.
pub fn to_matrix(h: &Hamiltonian) -> Result<DMatrix<Complex64>> {
    terms_to_matrix(h.n_qubits, &h.terms, crate::exactsim::DenseLimits::default().single)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn x_times_y_is_i_z() {
        assert_eq!(pauli_multiply(&p("X"), &p("Y")).unwrap(), (Phase::I, p("Z")));
        assert_eq!(pauli_multiply(&p("IZ"), &p("IZ")).unwrap(), (Phase::ONE, p("II")));
    }

    #[test]
    fn length_mismatch_is_input_error() {
        assert!(matches!(pauli_multiply(&p("X"), &p("XX")), Err(Error::Input(_))));
    }

    #[test]
    fn text_round_trip() {
        let h = ham_ising(3).unwrap();
        let back = Hamiltonian::from_text(&h.to_text()).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn rescale_arithmetic() {
        let h = Hamiltonian::new(
            1,
            vec![PauliTerm::new(3.0, p("Z")), PauliTerm::new(-1.0, p("X"))],
        )
        .unwrap();
        let r = rescale(&h, 0.2).unwrap();
        assert!((r.scale() - 5.0).abs() < 1e-12);
        assert!((r.terms()[0].coefficient - 0.6).abs() < 1e-12);
        let rr = rescale(&r, 0.2).unwrap();
        assert!((rr.scale() - r.scale() * r.one_norm() / 0.8).abs() < 1e-12);
    }

    #[test]
    fn ising_term_counts() {
        assert_eq!(ham_ising(3).unwrap().terms().len(), 6);
        let h2 = ham_ising(2).unwrap();
        assert_eq!(h2.terms().len(), 3);
        assert_eq!(h2.terms()[0].coefficient, 2.0);
        assert_eq!(ham_ising_with(2, Boundary::Open).unwrap().terms()[0].coefficient, 1.0);
        assert!(ham_ising(1).is_err());
    }

    #[test]
    fn diagonal_small_values() {
        let h1 = ham_diagonal(1).unwrap();
        assert!(h1.diagonal_energy(0).abs() < 1e-12);
        assert!((h1.diagonal_energy(1) - 1.0).abs() < 1e-12);
        assert!((ham_diagonal(2).unwrap().diagonal_energy(0b11) - 3.0).abs() < 1e-12);
        assert!(ham_diagonal(0).is_err());
    }

    #[test]
    fn hubbard_bad_grid() {
        assert!(ham_hubbard_jw(1, 1, 1.0, 1.0).is_err());
        assert!(ham_hubbard_jw(0, 3, 1.0, 1.0).is_err());
    }
}
