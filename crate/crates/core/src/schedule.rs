//! Cooling schedules by monotone-predicate binary search.
//!
//! From the current anchor `β_k`, the next point is the largest `β*` whose
//! Gibbs-state overlap `f(β_k, β*) = Z(m)²/(Z(β_k)Z(β*))`, `m = (β_k+β*)/2`,
//! stays above `1/c2`. Since `1/f` is the relative variance of the telescoping
//! ratio, every adjacent pair then has relative variance at most `c2`.

use serde::{Deserialize, Serialize};

use crate::clifford::{collect_shadow_with, derive_seed, Locality, ShadowOptions, ShadowSet};
use crate::error::{Error, Result};
use crate::exactsim::{gibbs_from_spectrum, spectrum, DenseLimits, Spectrum, StateVector};
use crate::pauli::Hamiltonian;
use crate::pvgs::{evolve, PvgsConfig};
use crate::shadows::{overlap_estimate, OverlapOptions};

/// How Gibbs purifications are prepared for shadow collection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsSource {
    /// Dense purification from the spectrum.
    #[default]
    Oracle,
    /// Variational preparation.
    Pvgs(PvgsConfig),
}

/// How `f(β_k, β)` is evaluated inside the search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    #[default]
    Exact,
    Shadow {
        samples: usize,
        #[serde(default)]
        all_pairs: bool,
        #[serde(default)]
        gibbs: GibbsSource,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    /// Search precision; `None` means `1/(2n)`.
    pub alpha: Option<f64>,
    pub overlap: OverlapMode,
    /// Guard band `ε₂` added to the acceptance threshold.
    pub guard: f64,
    /// Optional cap on a single step `β_{i+1} − β_i`.
    pub max_step: Option<f64>,
    /// Upper bound on schedule points.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            overlap: OverlapMode::Exact,
            guard: 0.0,
            max_step: None,
            max_points: 100_000,
            seed: 0,
        }
    }
}

/// Ascending inverse temperatures with their adjacent-pair overlaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub target_beta: f64,
    pub c2: f64,
    pub betas: Vec<f64>,
    /// `f̂(β_i, β_{i+1})` for each adjacent pair.
    pub certificates: Vec<f64>,
    #[serde(default)]
    pub predicate_calls: usize,
    #[serde(default)]
    pub snapshots: usize,
}

impl CoolingSchedule {
    /// Number of adjacent pairs `l`.
    pub fn len(&self) -> usize {
        self.betas.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Ascending from 0 to the target, one certificate per pair.
    pub fn validate(&self) -> Result<()> {
        if self.betas.first() != Some(&0.0) {
            return Err(Error::Input("schedule must start at 0".into()));
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("schedule must be strictly ascending".into()));
        }
        if (self.betas.last().unwrap() - self.target_beta).abs() > 1e-12 * self.target_beta.max(1.0) {
            return Err(Error::Input("schedule must end at the target beta".into()));
        }
        if self.certificates.len() != self.len() {
            return Err(Error::Input("one certificate per adjacent pair required".into()));
        }
        Ok(())
    }
}

/// Outcome of [`binary_search`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchResult {
    pub value: f64,
    pub calls: usize,
}

/// Largest point found with `predicate` true: `hi` if it passes, else bisection
/// down to width `alpha` keeping `predicate(lo)` true and `predicate(hi)` false.
///
/// `predicate(lo)` is only evaluated when the search never moves `lo`.
pub fn binary_search<F>(mut predicate: F, lo: f64, hi: f64, alpha: f64) -> Result<SearchResult>
where
    F: FnMut(f64) -> Result<bool>,
{
    let r = bisect(&mut predicate, lo, hi, alpha)?;
    if r.value == lo && !predicate(lo)? {
        return Err(Error::Contract(format!("predicate is false at the lower end {lo}")));
    }
    Ok(r)
}

fn bisect<F>(predicate: &mut F, mut lo: f64, mut hi: f64, alpha: f64) -> Result<SearchResult>
where
    F: FnMut(f64) -> Result<bool>,
{
    if !(alpha > 0.0) || !(hi >= lo) {
        return Err(Error::Input(format!("need alpha > 0 and hi >= lo, got alpha={alpha}, [{lo}, {hi}]")));
    }
    let mut calls = 1;
    if predicate(hi)? {
        return Ok(SearchResult { value: hi, calls });
    }
    while hi - lo > alpha {
        let mid = 0.5 * (lo + hi);
        calls += 1;
        if predicate(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SearchResult { value: lo, calls })
}

/// Dense `f(β_k, β)` from a spectrum.
pub fn exact_overlap(spec: &Spectrum, beta_k: f64, beta: f64) -> f64 {
    let mid = 0.5 * (beta_k + beta);
    (2.0 * spec.log_partition(mid) - spec.log_partition(beta_k) - spec.log_partition(beta)).exp()
}

fn prepare_gibbs(h: &Hamiltonian, spec: &Spectrum, beta: f64, source: &GibbsSource) -> Result<StateVector> {
    match source {
        GibbsSource::Oracle => Ok(gibbs_from_spectrum(spec, beta)?.state),
        GibbsSource::Pvgs(cfg) => {
            let cfg = PvgsConfig {
                track_fidelity: false,
                ..cfg.clone()
            };
            Ok(evolve(h, &[beta], &cfg)?.samples.remove(0).state)
        }
    }
}

fn gibbs_shadow(
    h: &Hamiltonian,
    spec: &Spectrum,
    beta: f64,
    samples: usize,
    source: &GibbsSource,
    seed: u64,
) -> Result<ShadowSet> {
    let psi = prepare_gibbs(h, spec, beta, source)?;
    let opts = ShadowOptions {
        locality: Locality::Global,
        register_qubits: None,
        label: format!("gibbs beta={beta}"),
    };
    collect_shadow_with(&psi, samples, seed, &opts)
}

/// Single evaluation of `f(β_k, β)`: dense in exact mode, shadow overlap otherwise.
pub fn overlap_f(h: &Hamiltonian, beta_k: f64, beta: f64, cfg: &ScheduleConfig) -> Result<f64> {
    if !(beta >= beta_k && beta_k >= 0.0) {
        return Err(Error::Input(format!("need beta >= beta_k >= 0, got {beta_k}, {beta}")));
    }
    let spec = spectrum(h, &DenseLimits::default())?;
    match &cfg.overlap {
        OverlapMode::Exact => Ok(exact_overlap(&spec, beta_k, beta)),
        OverlapMode::Shadow {
            samples,
            all_pairs,
            gibbs,
        } => {
            let a = gibbs_shadow(h, &spec, beta_k, *samples, gibbs, derive_seed(cfg.seed, 0))?;
            let b = gibbs_shadow(h, &spec, beta, *samples, gibbs, derive_seed(cfg.seed, 1))?;
            overlap_estimate(&a, &b, OverlapOptions { all_pairs: *all_pairs })
        }
    }
}

/// Build a schedule from 0 to `beta` with adjacent relative variance at most `c2`.
pub fn csbs(h: &Hamiltonian, beta: f64, c2: f64, cfg: &ScheduleConfig) -> Result<CoolingSchedule> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Input(format!("target beta must be positive, got {beta}")));
    }
    if !(c2 > 1.0) {
        return Err(Error::Input(format!("c2 must exceed 1, got {c2}")));
    }
    let n = h.n_qubits();
    let alpha = cfg.alpha.unwrap_or(1.0 / (2.0 * n as f64));
    if !(alpha > 0.0) {
        return Err(Error::Config("alpha must be positive".into()));
    }
    if let Some(s) = cfg.max_step {
        if !(s > 0.0) {
            return Err(Error::Config("max_step must be positive".into()));
        }
    }
    let spec = spectrum(h, &DenseLimits::default())?;
    let threshold = 1.0 / c2 + cfg.guard;
    let mut betas = vec![0.0];
    let mut certs = Vec::new();
    let mut calls = 0;
    let mut snapshots = 0;
    let mut probe_index = 0u64;
    while *betas.last().unwrap() < beta {
        if betas.len() > cfg.max_points {
            return Err(Error::Resource(format!("schedule exceeds {} points", cfg.max_points)));
        }
        let bk = *betas.last().unwrap();
        let hi = cfg.max_step.map_or(beta, |s| (bk + s).min(beta));
        let anchor = match &cfg.overlap {
            OverlapMode::Exact => None,
            OverlapMode::Shadow { samples, gibbs, .. } => {
                snapshots += samples;
                probe_index += 1;
                Some(gibbs_shadow(h, &spec, bk, *samples, gibbs, derive_seed(cfg.seed, probe_index))?)
            }
        };
        let mut seen: Vec<(f64, f64)> = Vec::new();
        let mut estimate = |x: f64| -> Result<f64> {
            match (&cfg.overlap, &anchor) {
                (OverlapMode::Shadow { samples, all_pairs, gibbs }, Some(a)) => {
                    snapshots += samples;
                    probe_index += 1;
                    let b = gibbs_shadow(h, &spec, x, *samples, gibbs, derive_seed(cfg.seed, probe_index))?;
                    overlap_estimate(a, &b, OverlapOptions { all_pairs: *all_pairs })
                }
                _ => Ok(exact_overlap(&spec, bk, x)),
            }
        };
        let found = bisect(
            &mut |x: f64| {
                let f = estimate(x)?;
                seen.push((x, f));
                Ok(f >= threshold)
            },
            bk,
            hi,
            alpha,
        )?;
        calls += found.calls;
        if found.value <= bk {
            // The closest failing probe to the anchor.
            let (probe, overlap) = seen
                .iter()
                .filter(|(_, f)| *f < threshold)
                .fold((hi, f64::NAN), |acc, &(x, f)| if x <= acc.0 { (x, f) } else { acc });
            return Err(Error::ScheduleStall {
                beta_k: bk,
                probe,
                overlap,
                threshold,
            });
        }
        let cert = seen
            .iter()
            .rev()
            .find(|(x, _)| *x == found.value)
            .map(|(_, f)| *f)
            .expect("accepted point was evaluated");
        betas.push(if (found.value - beta).abs() < 1e-12 { beta } else { found.value });
        certs.push(cert);
    }
    Ok(CoolingSchedule {
        target_beta: beta,
        c2,
        betas,
        certificates: certs,
        predicate_calls: calls,
        snapshots,
    })
}

/// Soft length bound `⌈√(q ln n)⌉ + 1`, `q = ln(Z(β)/Z(0))`.
pub fn length_bound(spec: &Spectrum, beta: f64) -> f64 {
    let q = (spec.log_partition(beta) - spec.log_partition(0.0)).abs();
    let n = spec.n_qubits as f64;
    (q * n.ln().max(0.0)).sqrt().ceil() + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_semantics() {
        let r = binary_search(|x| Ok(x <= 1.3), 0.0, 2.0, 0.01).unwrap();
        assert!(r.value >= 1.29 && r.value <= 1.30);
        let r = binary_search(|_| Ok(true), 0.0, 2.0, 0.01).unwrap();
        assert_eq!((r.value, r.calls), (2.0, 1));
        assert!(matches!(binary_search(|_| Ok(false), 0.0, 2.0, 0.1), Err(Error::Contract(_))));
    }
}
