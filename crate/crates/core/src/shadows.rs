//! Classical-shadow estimators.
//!
//! A snapshot `(U, b)` is inverted to `ρ̂ = ⊗_blocks ((d+1) U_j†|b_j⟩⟨b_j|U_j − I)` with
//! `d = 2^{block size}`. Nothing is materialized: pairwise traces use stabilizer-state
//! overlaps and Pauli expectations use tableau conjugation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordElement, Locality, ShadowSet, Snapshot};
use crate::error::{Error, Result};
use crate::pauli::{terms_to_matrix, PauliString, PauliSum, PauliTerm, PhasedPauli};

#[derive(Clone, Debug)]
struct Block {
    offset: usize,
    len: usize,
    forward: CliffordElement,
    /// Stabilizer generators of `U†|b⟩` on the block, in block coordinates.
    stabilizers: Vec<PhasedPauli>,
    outcome: u64,
}

/// Implicit channel-inverted snapshot.
#[derive(Clone, Debug)]
pub struct InvertedSnapshot {
    n: usize,
    blocks: Vec<Block>,
}

/// Block layout `(offset, len)` of a locality on `n` qubits.
pub fn block_layout(n: usize, locality: Locality) -> Result<Vec<(usize, usize)>> {
    match locality {
        Locality::Global => Ok(vec![(0, n)]),
        Locality::Local(0) => Err(Error::Input("block size must be >= 1".into())),
        Locality::Local(k) => Ok((0..n).step_by(k).map(|o| (o, k.min(n - o))).collect()),
    }
}

impl InvertedSnapshot {
    pub fn new(snapshot: &Snapshot, locality: Locality) -> Result<Self> {
        let n = snapshot.unitary.n_qubits();
        let mut blocks = Vec::new();
        for (offset, len) in block_layout(n, locality)? {
            let forward = if len == n {
                snapshot.unitary.clone()
            } else {
                snapshot.unitary.restrict(offset, len)?
            };
            let outcome = (snapshot.outcome >> offset) & low_mask(len);
            let inv = forward.inverse();
            let stabilizers = (0..len)
                .map(|j| {
                    let mut g = inv.rows()[len + j];
                    if outcome >> j & 1 == 1 {
                        g.k = (g.k + 2) % 4;
                    }
                    g
                })
                .collect();
            blocks.push(Block {
                offset,
                len,
                forward,
                stabilizers,
                outcome,
            });
        }
        Ok(Self { n, blocks })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// `Tr(ρ̂ ρ̂')` for snapshots with the same block layout.
    pub fn trace_product(&self, other: &InvertedSnapshot) -> Result<f64> {
        if self.n != other.n || self.blocks.len() != other.blocks.len() {
            return Err(Error::Input("snapshot layouts differ".into()));
        }
        let mut v = 1.0;
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            if (a.offset, a.len) != (b.offset, b.len) {
                return Err(Error::Input("snapshot layouts differ".into()));
            }
            let d = (1u64 << a.len) as f64;
            let p = stabilizer_overlap(&a.forward, a.outcome, &b.stabilizers);
            v *= (d + 1.0) * (d + 1.0) * p - 2.0 * (d + 1.0) + d;
        }
        Ok(v)
    }

    /// `Tr(P ρ̂)` for a Pauli string on the snapshot register.
    pub fn pauli_value(&self, p: &PauliString) -> f64 {
        let raw = PhasedPauli::from_string(p, false);
        let mut v = 1.0;
        for b in &self.blocks {
            let m = low_mask(b.len);
            let local = PhasedPauli {
                k: 0,
                x: (raw.x >> b.offset) & m,
                z: (raw.z >> b.offset) & m,
            };
            if local.x == 0 && local.z == 0 {
                continue;
            }
            // Cheap filter: the conjugate must be diagonal.
            if conjugated_x(&b.forward, &local) != 0 {
                return 0.0;
            }
            let local = PhasedPauli {
                k: ((local.x & local.z).count_ones() % 4) as u8,
                ..local
            };
            let img = b.forward.conjugate_raw(&local);
            let k = (img.k as u32 + 2 * (img.z & b.outcome).count_ones()) % 4;
            let sign = match k {
                0 => 1.0,
                2 => -1.0,
                _ => unreachable!("Hermitian Pauli conjugates to a real sign"),
            };
            v *= ((1u64 << b.len) as f64 + 1.0) * sign;
        }
        v
    }

    /// `Tr(O ρ̂)` for a Pauli sum acting on the first `obs.n_qubits()` qubits.
    pub fn observable_value(&self, obs: &PauliSum) -> Result<f64> {
        if obs.n_qubits() > self.n {
            return Err(Error::Input(format!(
                "observable on {} qubits, snapshot on {}",
                obs.n_qubits(),
                self.n
            )));
        }
        let mut acc = 0.0;
        for t in obs.terms() {
            let p = if obs.n_qubits() == self.n {
                t.string
            } else {
                t.string.embed(self.n, 0)?
            };
            acc += t.coefficient * self.pauli_value(&p);
        }
        Ok(acc)
    }

    /// Dense `ρ̂` for oracle checks on small registers.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n > 8 {
            return Err(Error::Resource(format!("dense snapshot on {} qubits", self.n)));
        }
        let dim = 1usize << self.n;
        let id = DMatrix::<Complex64>::identity(dim, dim);
        let mut out = id.clone();
        for b in &self.blocks {
            let mut proj = id.clone();
            for g in &b.stabilizers {
                let (neg, s) = g.to_signed(b.len)?;
                let s = s.embed(self.n, b.offset)?;
                let coef = if neg { -1.0 } else { 1.0 };
                let gm = terms_to_matrix(self.n, &[PauliTerm::new(coef, s)], self.n)?;
                proj = proj * (&id + gm) * Complex64::new(0.5, 0.0);
            }
            let d = (1u64 << b.len) as f64;
            out *= proj * Complex64::new(d + 1.0, 0.0) - &id;
        }
        Ok(out)
    }
}

fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// X-part of `U P U†` (phases ignored).
#[inline]
fn conjugated_x(u: &CliffordElement, p: &PhasedPauli) -> u64 {
    let rows = u.rows();
    let n = u.n_qubits();
    let mut x = 0;
    let (mut px, mut pz) = (p.x, p.z);
    while px != 0 {
        x ^= rows[px.trailing_zeros() as usize].x;
        px &= px - 1;
    }
    while pz != 0 {
        x ^= rows[n + pz.trailing_zeros() as usize].x;
        pz &= pz - 1;
    }
    x
}

/// `|⟨b|U|s⟩|²` where `|s⟩` has the given stabilizer generators.
fn stabilizer_overlap(u: &CliffordElement, b: u64, stabilizers: &[PhasedPauli]) -> f64 {
    let n = u.n_qubits();
    let mut gens: Vec<PhasedPauli> = stabilizers.iter().map(|g| u.conjugate_raw(g)).collect();
    let mut rank = 0;
    for col in 0..n {
        let bit = 1u64 << col;
        let Some(piv) = (rank..gens.len()).find(|&r| gens[r].x & bit != 0) else {
            continue;
        };
        gens.swap(rank, piv);
        let p = gens[rank];
        for (r, g) in gens.iter_mut().enumerate() {
            if r != rank && g.x & bit != 0 {
                *g = g.mul(&p);
            }
        }
        rank += 1;
    }
    for g in &gens[rank..] {
        if !(g.k as u32 + 2 * (g.z & b).count_ones()).is_multiple_of(4) {
            return 0.0;
        }
    }
    0.5f64.powi(rank as i32)
}

fn inverted(set: &ShadowSet) -> Result<Vec<InvertedSnapshot>> {
    set.snapshots
        .iter()
        .map(|s| InvertedSnapshot::new(s, set.locality))
        .collect()
}

fn check_pair(a: &ShadowSet, b: &ShadowSet) -> Result<()> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::Input("shadow sets on different qubit counts".into()));
    }
    if a.locality != b.locality {
        return Err(Error::Input("shadow sets use different localities".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("empty shadow set".into()));
    }
    Ok(())
}

/// Per-index values `Tr(ρ̂_j(ψ) ρ̂_j(φ))`.
pub fn paired_overlap_values(a: &ShadowSet, b: &ShadowSet) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "shadow sizes differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (ia, ib) = (inverted(a)?, inverted(b)?);
    ia.iter().zip(&ib).map(|(x, y)| x.trace_product(y)).collect()
}

/// Overlap estimator options.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapOptions {
    /// Average over all `M_a × M_b` cross pairs instead of index pairs.
    pub all_pairs: bool,
}

/// Estimate of `|⟨ψ|φ⟩|²` from two shadow sets of the same locality.
pub fn overlap_estimate(a: &ShadowSet, b: &ShadowSet, opts: OverlapOptions) -> Result<f64> {
    if !opts.all_pairs {
        let v = paired_overlap_values(a, b)?;
        return Ok(v.iter().sum::<f64>() / v.len() as f64);
    }
    check_pair(a, b)?;
    let (ia, ib) = (inverted(a)?, inverted(b)?);
    let mut acc = 0.0;
    for x in &ia {
        let mut row = 0.0;
        for y in &ib {
            row += x.trace_product(y)?;
        }
        acc += row;
    }
    Ok(acc / (ia.len() * ib.len()) as f64)
}

/// Paired overlap estimator over global Clifford snapshots.
pub fn overlap_global(a: &ShadowSet, b: &ShadowSet) -> Result<f64> {
    if a.locality != Locality::Global || b.locality != Locality::Global {
        return Err(Error::Input("global overlap needs global snapshots".into()));
    }
    overlap_estimate(a, b, OverlapOptions::default())
}

/// Paired overlap estimator over snapshots of `k`-qubit block Cliffords.
pub fn overlap_local(a: &ShadowSet, b: &ShadowSet, k: usize) -> Result<f64> {
    let ok = |s: &ShadowSet| match s.locality {
        Locality::Local(j) => j == k || (j >= s.n_qubits && k >= s.n_qubits),
        Locality::Global => k >= s.n_qubits,
    };
    if !ok(a) || !ok(b) {
        return Err(Error::Input(format!("shadow locality does not match k={k}")));
    }
    overlap_estimate(a, b, OverlapOptions::default())
}

/// Median-of-means configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MMConfig {
    pub total_samples: usize,
    pub group_count: usize,
}

impl MMConfig {
    pub fn new(total_samples: usize, group_count: usize) -> Result<Self> {
        if group_count == 0 || total_samples < group_count {
            return Err(Error::Input(format!(
                "median of means needs 1 <= K <= N (N={total_samples}, K={group_count})"
            )));
        }
        Ok(Self {
            total_samples,
            group_count,
        })
    }

    /// Plain mean over `n` samples.
    pub fn mean(n: usize) -> Result<Self> {
        Self::new(n, 1)
    }
}

/// Median of `k` contiguous group means; the remainder is dropped.
pub fn median_of_means(values: &[f64], k: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("median of means of empty input".into()));
    }
    if k == 0 || k > values.len() {
        return Err(Error::Input(format!(
            "group count {k} outside 1..={}",
            values.len()
        )));
    }
    let size = values.len() / k;
    let mut means: Vec<f64> = values
        .chunks_exact(size)
        .take(k)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    Ok(if k % 2 == 1 {
        means[k / 2]
    } else {
        0.5 * (means[k / 2 - 1] + means[k / 2])
    })
}

/// Per-snapshot values `Tr(O ρ̂_j)`.
pub fn observable_values(shadow: &ShadowSet, obs: &PauliSum) -> Result<Vec<f64>> {
    if shadow.is_empty() {
        return Err(Error::Input("empty shadow set".into()));
    }
    let obs = if obs.n_qubits() < shadow.n_qubits {
        obs.embed(shadow.n_qubits, 0)?
    } else if obs.n_qubits() == shadow.n_qubits {
        obs.clone()
    } else {
        return Err(Error::Input(format!(
            "observable on {} qubits, shadow on {}",
            obs.n_qubits(),
            shadow.n_qubits
        )));
    };
    shadow
        .snapshots
        .iter()
        .map(|s| InvertedSnapshot::new(s, shadow.locality)?.observable_value(&obs))
        .collect()
}

/// Median-of-means estimate of `Tr(O ρ)`.
pub fn estimate_observable(shadow: &ShadowSet, obs: &PauliSum, mm: MMConfig) -> Result<f64> {
    if mm.total_samples > shadow.len() {
        return Err(Error::Input(format!(
            "median of means wants {} samples, shadow has {}",
            mm.total_samples,
            shadow.len()
        )));
    }
    let v = observable_values(shadow, obs)?;
    median_of_means(&v[..mm.total_samples], mm.group_count)
}

/// Samples per factor so the product of `l` means is within `(1 ± ε)` of the true
/// product with probability `1 − δ`, given relative variances bounded by `max(S)`.
pub fn product_mean_bound_check(relative_variances: &[f64], epsilon: f64, delta: f64) -> Result<usize> {
    if !(epsilon > 0.0) || !(delta > 0.0) {
        return Err(Error::Input("epsilon and delta must be positive".into()));
    }
    if relative_variances.is_empty() {
        return Err(Error::Input("no factors given".into()));
    }
    if relative_variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input("relative variances must be finite and >= 0".into()));
    }
    let b = relative_variances.iter().cloned().fold(0.0, f64::max);
    let l = relative_variances.len() as f64;
    let m = 2.0 * b * l / (delta * epsilon * epsilon);
    // Guard against float noise pushing an exact integer up by one.
    let r = m.round();
    Ok(if (m - r).abs() < 1e-9 * m.max(1.0) { r } else { m.ceil() } as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm_examples() {
        assert_eq!(median_of_means(&[0.0, 0.0, 0.0, 100.0, 0.0, 0.0], 3).unwrap(), 0.0);
        assert_eq!(median_of_means(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(), 2.5);
        assert_eq!(median_of_means(&[1.0, 2.0, 3.0, 10.0], 4).unwrap(), 2.5);
        assert_eq!(median_of_means(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap(), 2.5);
        assert!(median_of_means(&[], 1).is_err());
        assert!(median_of_means(&[1.0], 2).is_err());
    }

    #[test]
    fn bound_check_examples() {
        assert_eq!(product_mean_bound_check(&[15.0; 4], 0.5, 0.1).unwrap(), 4800);
        assert_eq!(product_mean_bound_check(&[1.0], 1.0, 1.0).unwrap(), 2);
        assert_eq!(product_mean_bound_check(&[1.0, 15.0, 3.0, 2.0], 0.5, 0.1).unwrap(), 4800);
        assert!(product_mean_bound_check(&[1.0], 0.0, 0.1).is_err());
        assert!(product_mean_bound_check(&[1.0], 0.1, -1.0).is_err());
    }

    #[test]
    fn layouts() {
        assert_eq!(block_layout(5, Locality::Local(2)).unwrap(), vec![(0, 2), (2, 2), (4, 1)]);
        assert_eq!(block_layout(3, Locality::Global).unwrap(), vec![(0, 3)]);
        assert!(block_layout(3, Locality::Local(0)).is_err());
    }
}
