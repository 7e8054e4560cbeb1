//! Mean values of `exp(−dH)` on Gibbs states.
//!
//! A Chebyshev approximation of `e^{−dx}` on the window `[−1+δ, 1−δ]` is built in
//! three stages: a truncated Taylor polynomial, a least-squares Fourier fit with
//! frequencies `πm/2`, and a Jacobi–Anger conversion of each Fourier mode into
//! Chebyshev polynomials. The result is certified on a 1000-point grid before it
//! is returned. `⟨μ_β|p(H)|μ_β⟩` is then estimated from shadows by expanding
//! `p(H)` into Pauli strings.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clifford::ShadowSet;
use crate::error::{Error, Result};
use crate::exactsim::{spectrum, DenseLimits, Spectrum};
use crate::pauli::{Hamiltonian, PauliSum};
use crate::shadows::{estimate_observable, MMConfig};

/// Points in the certification grid.
pub const CERTIFICATION_POINTS: usize = 1000;

/// Default cap on merged Pauli terms when expanding polynomials of `H`.
pub const DEFAULT_TERM_CAP: usize = 100_000;

/// Smallest `K` with `Σ_{k>K} |d|^k/k! ≤ eps/4`.
pub fn taylor_degree(d: f64, eps: f64) -> Result<usize> {
    if !d.is_finite() || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Input(format!("need finite d and eps in (0,1), got d={d}, eps={eps}")));
    }
    let d = d.abs();
    if d == 0.0 {
        return Ok(0);
    }
    let terms = taylor_terms(d);
    // Suffix sums from the smallest term upwards.
    let mut tail = vec![0.0; terms.len() + 1];
    for k in (0..terms.len()).rev() {
        tail[k] = tail[k + 1] + terms[k];
    }
    Ok((0..terms.len())
        .find(|&k| tail[k + 1] <= eps / 4.0)
        .unwrap_or(terms.len() - 1))
}

/// `d^k/k!` until the terms are negligible against the running sum.
fn taylor_terms(d: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut t = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        t *= d / k;
        out.push(t);
        sum += t;
        if k > d && t < 1e-18 * sum {
            break;
        }
        k += 1.0;
    }
    out
}

/// Bessel functions `J_0(t), …, J_kmax(t)` by Miller's backward recurrence.
pub fn bessel_j(kmax: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if t == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let neg = t < 0.0;
    let x = t.abs();
    let top = kmax.max(x as usize) + 20 + (40.0 * (kmax.max(x as usize) as f64 + 1.0)).sqrt() as usize;
    let start = top + (top % 2);
    let mut next = 0.0f64;
    let mut cur = 1e-300f64;
    let mut norm = 0.0f64;
    let mut vals = vec![0.0; start + 1];
    vals[start] = cur;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
            next *= 1e-250;
            cur *= 1e-250;
        }
    }
    // J_0 + 2 Σ J_{2k} = 1.
    for (k, v) in vals.iter().enumerate() {
        if k == 0 {
            norm += v;
        } else if k % 2 == 0 {
            norm += 2.0 * v;
        }
    }
    for k in 0..=kmax {
        let v = vals[k] / norm;
        // J_k(−t) = (−1)^k J_k(t).
        out[k] = if neg && k % 2 == 1 { -v } else { v };
    }
    out
}

/// `r > t` solving `(t/r)^r = eps` by bisection; zero when `t = 0`.
pub fn bessel_cutoff(t: f64, eps: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let target = eps.ln();
    let f = |r: f64| r * (t / r).ln() - target;
    let mut lo = t;
    let mut hi = 2.0 * t + 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Construction limits for [`build_expansion_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCaps {
    /// Upper bound on the Fourier cutoff on top of the theoretical `M_f`.
    pub max_fourier: usize,
    /// Upper bound on the Chebyshev degree.
    pub max_degree: usize,
}

impl Default for ExpansionCaps {
    fn default() -> Self {
        Self {
            max_fourier: 400,
            max_degree: 2000,
        }
    }
}

/// Construction record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub taylor_degree: usize,
    /// Theoretical Fourier cutoff `ceil(2 ln(4‖a‖₁/ε)/δ)`.
    pub fourier_cap: usize,
    /// Cutoff actually used (smallest meeting the fit tolerance).
    pub fourier_used: usize,
    pub fit_deviation: f64,
    /// Jacobi–Anger truncation `R_m` per Fourier index.
    pub bessel_orders: Vec<usize>,
    /// Degree before dropping trailing terms.
    pub raw_degree: usize,
}

/// Certified Chebyshev approximation of `e^{−dx}` on `[−1+δ, 1−δ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorExpansion {
    pub d: f64,
    #[serde(rename = "delta")]
    pub window_delta: f64,
    #[serde(rename = "eps")]
    pub target_error: f64,
    pub weights: BTreeMap<usize, f64>,
    /// Max grid deviation found during certification.
    pub certificate: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

impl OperatorExpansion {
    pub fn degree(&self) -> usize {
        self.weights.keys().next_back().copied().unwrap_or(0)
    }

    /// Dense coefficient vector indexed by degree.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.degree() + 1];
        for (j, w) in &self.weights {
            c[*j] = *w;
        }
        c
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coefficients(), x)
    }

    /// Max deviation from `e^{−dx}` over the certification grid.
    pub fn max_deviation(&self) -> f64 {
        grid_deviation(&self.coefficients(), self.d, self.window_delta)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `Σ c_j T_j(x)`.
pub fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for cj in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + cj;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + x * b1 - b2
}

fn window_grid(delta: f64) -> impl Iterator<Item = f64> {
    let a = -1.0 + delta;
    let b = 1.0 - delta;
    (0..CERTIFICATION_POINTS).map(move |i| a + (b - a) * i as f64 / (CERTIFICATION_POINTS - 1) as f64)
}

fn grid_deviation(c: &[f64], d: f64, delta: f64) -> f64 {
    window_grid(delta)
        .map(|x| (clenshaw(c, x) - (-d * x).exp()).abs())
        .fold(0.0, f64::max)
}

/// Build with default caps.
pub fn build_expansion(d: f64, window_delta: f64, eps: f64) -> Result<OperatorExpansion> {
    build_expansion_with(d, window_delta, eps, ExpansionCaps::default())
}

pub fn build_expansion_with(
    d: f64,
    window_delta: f64,
    eps: f64,
    caps: ExpansionCaps,
) -> Result<OperatorExpansion> {
    if !(window_delta > 0.0 && window_delta < 1.0) {
        return Err(Error::Input(format!("window delta must be in (0,1), got {window_delta}")));
    }
    if !(eps > 0.0 && eps < (-1.0f64).exp()) {
        return Err(Error::Input(format!("eps must be in (0, 1/e), got {eps}")));
    }
    let kf = taylor_degree(d, eps)?;
    if d == 0.0 {
        return Ok(OperatorExpansion {
            d,
            window_delta,
            target_error: eps,
            weights: BTreeMap::from([(0, 1.0)]),
            certificate: 0.0,
            provenance: Provenance::default(),
        });
    }

    // Truncated Taylor polynomial of e^{−dx}.
    let mut a = vec![1.0];
    for k in 1..=kf {
        let prev = a[k - 1];
        a.push(prev * (-d) / k as f64);
    }
    let a_norm: f64 = a.iter().map(|v| v.abs()).sum();
    let taylor = |x: f64| a.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let fourier_cap = ((2.0 * (4.0 * a_norm / eps).ln() / window_delta).ceil().max(0.0)) as usize;
    let m_limit = fourier_cap.min(caps.max_fourier).max(1);

    // Least-squares Fourier fit with the smallest cutoff meeting eps/4.
    let fit_tol = eps / 4.0;
    // Stop early once the deviation has stalled at the floating-point floor.
    const STALL: usize = 4;
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for m in 1..=m_limit {
        let (coef, dev) = fourier_fit(&taylor, m, window_delta)?;
        if best.as_ref().is_none_or(|b| dev < b.2) {
            best = Some((m, coef, dev));
        }
        let (best_m, _, best_dev) = best.as_ref().expect("set above");
        if *best_dev <= fit_tol || m - best_m >= STALL {
            break;
        }
    }
    let (m_used, coef, fit_dev) = best.expect("loop runs at least once");

    // Jacobi–Anger conversion; coef = [c0, cos_1, sin_1, cos_2, sin_2, …].
    let coef_norm: f64 = coef.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let ja_tol = eps / (4.0 * coef_norm);
    let mut cheb: Vec<f64> = vec![coef[0]];
    let mut orders = vec![0usize];
    for m in 1..=m_used {
        let t = std::f64::consts::PI * m as f64 / 2.0;
        let (cm, sm) = (coef[2 * m - 1], coef[2 * m]);
        let scaled = std::f64::consts::E * m as f64 * std::f64::consts::PI / 4.0;
        let mut r = (0.5 * bessel_cutoff(scaled, ja_tol)).ceil() as usize;
        r = r.max(1);
        if 2 * r + 1 > caps.max_degree {
            r = (caps.max_degree - 1) / 2;
        }
        orders.push(r);
        let j = bessel_j(2 * r + 1, t);
        if cheb.len() < 2 * r + 2 {
            cheb.resize(2 * r + 2, 0.0);
        }
        cheb[0] += cm * j[0];
        for k in 1..=r {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            cheb[2 * k] += cm * 2.0 * sign * j[2 * k];
        }
        for k in 0..=r {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            cheb[2 * k + 1] += sm * 2.0 * sign * j[2 * k + 1];
        }
    }
    let raw_degree = cheb.len() - 1;

    // Drop trailing degrees while the certificate holds.
    let mut keep = cheb.len();
    let full = grid_deviation(&cheb, d, window_delta);
    if full <= eps {
        let mut lo = 1;
        let mut hi = cheb.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if grid_deviation(&cheb[..mid], d, window_delta) <= eps {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        keep = lo;
    }
    cheb.truncate(keep);
    let certificate = grid_deviation(&cheb, d, window_delta);
    if !(certificate <= eps) {
        return Err(Error::Certification {
            d,
            achieved: certificate,
            target: eps,
        });
    }
    let weights = cheb
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(j, w)| (j, *w))
        .collect();
    Ok(OperatorExpansion {
        d,
        window_delta,
        target_error: eps,
        weights,
        certificate,
        provenance: Provenance {
            taylor_degree: kf,
            fourier_cap,
            fourier_used: m_used,
            fit_deviation: fit_dev,
            bessel_orders: orders,
            raw_degree,
        },
    })
}

/// Fit `f` by `c0 + Σ_{m≤M} (a_m cos(πmx/2) + b_m sin(πmx/2))` on the window.
fn fourier_fit(f: &impl Fn(f64) -> f64, m: usize, delta: f64) -> Result<(Vec<f64>, f64)> {
    let cols = 2 * m + 1;
    let rows = (8 * cols).max(400);
    let lo = -1.0 + delta;
    let hi = 1.0 - delta;
    let xs: Vec<f64> = (0..rows)
        .map(|i| {
            // Chebyshev-distributed nodes on the window.
            let u = (std::f64::consts::PI * (i as f64 + 0.5) / rows as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * u
        })
        .collect();
    let basis = |x: f64, c: usize| -> f64 {
        if c == 0 {
            1.0
        } else {
            let k = c.div_ceil(2);
            let arg = std::f64::consts::PI * k as f64 * x / 2.0;
            if c % 2 == 1 {
                arg.cos()
            } else {
                arg.sin()
            }
        }
    };
    let design = DMatrix::from_fn(rows, cols, |r, c| basis(xs[r], c));
    let rhs = DVector::from_iterator(rows, xs.iter().map(|x| f(*x)));
    let svd = design.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max();
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::Numerical(format!("Fourier fit: {e}")))?;
    let coef: Vec<f64> = sol.iter().cloned().collect();
    let dev = window_grid(delta)
        .map(|x| {
            let v: f64 = (0..cols).map(|c| coef[c] * basis(x, c)).sum();
            (v - f(x)).abs()
        })
        .fold(0.0, f64::max);
    Ok((coef, dev))
}

/// Monomial coefficients of `Σ c_j T_j`.
pub fn chebyshev_to_monomial(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    t_prev[0] = 1.0;
    for (k, v) in out.iter_mut().enumerate() {
        *v += c[0] * t_prev[k];
    }
    if n > 1 {
        t_cur[1] = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            *v += c[1] * t_cur[k];
        }
    }
    for j in 2..n {
        let mut t_next = vec![0.0; n];
        for k in 0..n {
            if k > 0 {
                t_next[k] += 2.0 * t_cur[k - 1];
            }
            t_next[k] -= t_prev[k];
        }
        for (k, v) in out.iter_mut().enumerate() {
            *v += c[j] * t_next[k];
        }
        t_prev = t_cur;
        t_cur = t_next;
    }
    out
}

/// Chebyshev coefficients of `Σ a_k x^k`.
pub fn monomial_to_chebyshev(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    // x^k in the Chebyshev basis, built by x·T_j = (T_{j+1} + T_{|j−1|})/2.
    let mut xk = vec![0.0; n];
    if n == 0 {
        return out;
    }
    xk[0] = 1.0;
    for (k, ak) in a.iter().enumerate() {
        if k > 0 {
            let mut next = vec![0.0; n];
            for j in 0..k {
                let v = xk[j];
                if v == 0.0 {
                    continue;
                }
                if j == 0 {
                    next[1] += v;
                } else {
                    next[j + 1] += 0.5 * v;
                    next[j - 1] += 0.5 * v;
                }
            }
            xk = next;
        }
        for j in 0..n {
            out[j] += ak * xk[j];
        }
    }
    out
}

/// `H^0, …, H^s_max` as Pauli sums.
pub fn hamiltonian_powers(h: &Hamiltonian, s_max: usize, cap: usize) -> Result<Vec<PauliSum>> {
    let base = PauliSum::from_hamiltonian(h);
    let mut out = vec![PauliSum::identity(h.n_qubits())?];
    for s in 1..=s_max {
        let next = out[s - 1].multiply(&base, cap)?;
        out.push(next);
    }
    Ok(out)
}

/// `Σ_j w_j T_j(H)` as one Pauli sum via `T_{j+1} = 2H T_j − T_{j−1}`.
pub fn chebyshev_operator(h: &Hamiltonian, weights: &BTreeMap<usize, f64>, cap: usize) -> Result<PauliSum> {
    let n = h.n_qubits();
    let base = PauliSum::from_hamiltonian(h);
    let deg = weights.keys().next_back().copied().unwrap_or(0);
    let mut t_prev = PauliSum::identity(n)?;
    let mut acc = PauliSum::zero(n).add_scaled(&t_prev, *weights.get(&0).unwrap_or(&0.0))?;
    if deg == 0 {
        return Ok(acc);
    }
    let mut t_cur = base.clone();
    acc = acc.add_scaled(&t_cur, *weights.get(&1).unwrap_or(&0.0))?;
    for j in 2..=deg {
        let t_next = PauliSum::zero(n)
            .add_scaled(&t_cur.multiply(&base, cap)?, 2.0)?
            .add_scaled(&t_prev, -1.0)?;
        if t_next.len() > cap {
            return Err(Error::Resource(format!(
                "Pauli expansion exceeds {cap} terms; use exact mode"
            )));
        }
        if let Some(w) = weights.get(&j) {
            acc = acc.add_scaled(&t_next, *w)?;
        }
        t_prev = t_cur;
        t_cur = t_next;
    }
    Ok(acc)
}

/// Shadow estimate of `⟨μ_β|e^{−dH}|μ_β⟩` through the certified expansion.
///
/// `H` acts on the first register; the shadow may cover a larger register.
pub fn estimate_exp_mean(
    shadow: &ShadowSet,
    h: &Hamiltonian,
    expansion: &OperatorExpansion,
    mm: MMConfig,
    term_cap: usize,
) -> Result<f64> {
    let op = chebyshev_operator(h, &expansion.weights, term_cap)?;
    estimate_observable(shadow, &op, mm)
}

/// `Σ_j w_j ⟨T_j(H)⟩` from given power moments `⟨H^s⟩`.
pub fn combine_power_moments(expansion: &OperatorExpansion, moments: &[f64]) -> Result<f64> {
    let mono = chebyshev_to_monomial(&expansion.coefficients());
    if moments.len() < mono.len() {
        return Err(Error::Input(format!(
            "{} moments for a degree-{} expansion",
            moments.len(),
            expansion.degree()
        )));
    }
    Ok(mono.iter().zip(moments).map(|(a, m)| a * m).sum())
}

/// `⟨μ_β|e^{−dH}|μ_β⟩ = Z(β+d)/Z(β)` from a spectrum.
pub fn exp_mean_from_spectrum(spec: &Spectrum, beta: f64, d: f64) -> f64 {
    (spec.log_partition(beta + d) - spec.log_partition(beta)).exp()
}

/// Dense `⟨μ_β|e^{−dH}|μ_β⟩`.
pub fn exact_exp_mean(h: &Hamiltonian, beta: f64, d: f64) -> Result<f64> {
    if !beta.is_finite() || !d.is_finite() {
        return Err(Error::Input("beta and d must be finite".into()));
    }
    let spec = spectrum(h, &DenseLimits::default())?;
    Ok(exp_mean_from_spectrum(&spec, beta, d))
}
