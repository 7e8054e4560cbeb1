//! End-to-end partition-function estimation.
//!
//! The Hamiltonian is rescaled into `[−1+δ, 1−δ]`, a cooling schedule
//! `0 = β_0 < … < β_l = β'` is built on the rescaled axis, Gibbs purifications
//! are prepared at every schedule point, and
//! `Ẑ = 2^n · Π_i E[V_i]/E[W_i]` with `V_i = e^{−d_i H}` at `β_i`,
//! `W_i = e^{+d_i H}` at `β_{i+1}` and `d_i = (β_{i+1} − β_i)/2`.
//! One shadow set per schedule point serves both `V_i` and `W_{i−1}`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clifford::{collect_shadow_with, derive_seed, Locality, ShadowOptions};
use crate::error::{Error, Result};
use crate::exactsim::{gibbs_from_spectrum, spectrum, DenseLimits, Spectrum, StateVector};
use crate::mvcs::{build_expansion, clenshaw, estimate_exp_mean, exp_mean_from_spectrum, OperatorExpansion};
use crate::pauli::{ham_diagonal, ham_hubbard_jw, ham_ising_with, rescale, Boundary, Hamiltonian};
use crate::pvgs::{evolve, PvgsConfig};
use crate::schedule::{csbs, CoolingSchedule, GibbsSource, OverlapMode, ScheduleConfig};
use crate::shadows::{product_mean_bound_check, MMConfig};

/// Hamiltonian selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    Ising {
        n: usize,
        #[serde(default)]
        boundary: Boundary,
    },
    Diagonal {
        n: usize,
    },
    Hubbard {
        n_a: usize,
        n_b: usize,
        #[serde(default = "one")]
        t: f64,
        #[serde(default = "two")]
        u: f64,
    },
    /// Text file with an `n=<int> scale=<float>` header and `<coef> <pauli>` lines.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl HamiltonianSpec {
    pub fn build(&self) -> Result<Hamiltonian> {
        match self {
            HamiltonianSpec::Ising { n, boundary } => ham_ising_with(*n, *boundary),
            HamiltonianSpec::Diagonal { n } => ham_diagonal(*n),
            HamiltonianSpec::Hubbard { n_a, n_b, t, u } => ham_hubbard_jw(*n_a, *n_b, *t, *u),
            HamiltonianSpec::File { path } => Hamiltonian::from_text(&std::fs::read_to_string(path)?),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    #[default]
    Exact,
    Shadow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsMode {
    #[default]
    Oracle,
    Pvgs,
}

/// How `E[V_i]` and `E[W_i]` are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Dense `Z(β+d)/Z(β)`.
    #[default]
    Exact,
    /// Certified expansion evaluated with exact expectations.
    Expansion,
    /// Certified expansion estimated from shadows.
    Shadow,
}

/// Register measured for mean-value shadows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Register {
    /// Both registers of the purification.
    #[default]
    Doubled,
    /// Only the first register, whose reduced state is thermal.
    First,
}

/// Full run configuration. `seed` is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianSpec,
    pub beta: f64,
    pub seed: u64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    /// Guard band on the estimated schedule predicate.
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    /// Target relative accuracy of the product estimate.
    #[serde(default = "default_eps3")]
    pub eps3: f64,
    /// Expansion accuracy.
    #[serde(default = "default_eps4")]
    pub eps4: f64,
    /// Failure probability of the product estimate.
    #[serde(default = "default_delta3")]
    pub delta3: f64,
    /// Spectral window margin.
    #[serde(default = "default_window")]
    pub window_delta: f64,
    #[serde(default)]
    pub schedule_mode: ScheduleMode,
    #[serde(default = "default_schedule_samples")]
    pub schedule_samples: usize,
    #[serde(default = "default_true")]
    pub schedule_all_pairs: bool,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Cap on `β_{i+1} − β_i` on the rescaled axis.
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub gibbs_mode: GibbsMode,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_delta_beta")]
    pub delta_beta: f64,
    #[serde(default)]
    pub mean_mode: MeanMode,
    /// Snapshots per schedule point; `None` sizes by the product bound.
    #[serde(default)]
    pub shots: Option<usize>,
    /// Median-of-means groups; `None` uses `⌈2 ln(1/δ₃)⌉`.
    #[serde(default)]
    pub groups: Option<usize>,
    #[serde(default)]
    pub register: Register,
    #[serde(default = "default_locality")]
    pub locality: Locality,
    #[serde(default = "default_term_cap")]
    pub term_cap: usize,
}

fn default_c2() -> f64 {
    15.0
}
fn default_eps2() -> f64 {
    0.05
}
fn default_eps3() -> f64 {
    0.2
}
fn default_eps4() -> f64 {
    1e-3
}
fn default_delta3() -> f64 {
    0.2
}
fn default_window() -> f64 {
    0.2
}
fn default_schedule_samples() -> usize {
    1000
}
fn default_true() -> bool {
    true
}
fn default_depth() -> usize {
    8
}
fn default_delta_beta() -> f64 {
    0.01
}
fn default_locality() -> Locality {
    Locality::Global
}
fn default_term_cap() -> usize {
    crate::mvcs::DEFAULT_TERM_CAP
}

impl RunConfig {
    /// All stages exact with oracle Gibbs states.
    pub fn exact(hamiltonian: HamiltonianSpec, beta: f64, seed: u64) -> Self {
        Self {
            hamiltonian,
            beta,
            seed,
            c2: default_c2(),
            eps2: default_eps2(),
            eps3: default_eps3(),
            eps4: default_eps4(),
            delta3: default_delta3(),
            window_delta: default_window(),
            schedule_mode: ScheduleMode::Exact,
            schedule_samples: default_schedule_samples(),
            schedule_all_pairs: true,
            alpha: None,
            max_step: None,
            gibbs_mode: GibbsMode::Oracle,
            depth: default_depth(),
            delta_beta: default_delta_beta(),
            mean_mode: MeanMode::Exact,
            shots: None,
            groups: None,
            register: Register::Doubled,
            locality: Locality::Global,
            term_cap: default_term_cap(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in (0,1), got {v}")))
            }
        };
        unit("eps2", self.eps2)?;
        unit("eps3", self.eps3)?;
        unit("eps4", self.eps4)?;
        unit("delta3", self.delta3)?;
        unit("window_delta", self.window_delta)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.c2 > 1.0) {
            return Err(Error::Config(format!("c2 must exceed 1, got {}", self.c2)));
        }
        if self.shots == Some(0) || self.schedule_samples == 0 || self.groups == Some(0) {
            return Err(Error::Config("sample counts must be >= 1".into()));
        }
        if self.depth == 0 || !(self.delta_beta > 0.0) {
            return Err(Error::Config("depth and delta_beta must be positive".into()));
        }
        Ok(())
    }

    /// PVGS options used for variational Gibbs states.
    pub fn pvgs_config(&self) -> PvgsConfig {
        PvgsConfig {
            depth: self.depth,
            delta_beta: self.delta_beta,
            seed: derive_seed(self.seed, 3),
            track_fidelity: false,
            ..PvgsConfig::default()
        }
    }

    /// Search options for the cooling schedule on the rescaled axis.
    pub fn schedule_config(&self) -> ScheduleConfig {
        let shadow = self.schedule_mode == ScheduleMode::Shadow;
        ScheduleConfig {
            alpha: self.alpha,
            overlap: match self.schedule_mode {
                ScheduleMode::Exact => OverlapMode::Exact,
                ScheduleMode::Shadow => OverlapMode::Shadow {
                    samples: self.schedule_samples,
                    all_pairs: self.schedule_all_pairs,
                    gibbs: match self.gibbs_mode {
                        GibbsMode::Oracle => GibbsSource::Oracle,
                        GibbsMode::Pvgs => GibbsSource::Pvgs(self.pvgs_config()),
                    },
                },
            },
            guard: if shadow { self.eps2 } else { 0.0 },
            max_step: self.max_step,
            seed: derive_seed(self.seed, 1),
            ..ScheduleConfig::default()
        }
    }

    fn group_count(&self) -> usize {
        self.groups
            .unwrap_or_else(|| ((2.0 * (1.0 / self.delta3).ln()).ceil() as usize).max(1))
    }
}

/// One telescoping factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub beta_index: usize,
    /// `β_i` on the rescaled axis.
    pub beta: f64,
    pub d: f64,
    pub ev: f64,
    pub ew: f64,
    pub ev_exact: Option<f64>,
    pub ew_exact: Option<f64>,
    pub expansion_degree: Option<usize>,
}

/// Snapshot totals per stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingLedger {
    pub schedule: usize,
    pub gibbs: usize,
    pub mean_values: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub n_qubits: usize,
    /// Rescaling factor `s` with `H' = H/s`.
    pub scale: f64,
    pub beta_rescaled: f64,
    pub schedule: CoolingSchedule,
    pub steps: Vec<StepReport>,
    /// Fidelity of each prepared Gibbs state against the dense oracle.
    pub gibbs_fidelity: Vec<Option<f64>>,
    pub shots_per_point: Option<usize>,
    pub z_hat: f64,
    pub log_z_hat: f64,
    pub z_exact: Option<f64>,
    pub log_z_exact: Option<f64>,
    pub relative_error: Option<f64>,
    pub ledger: SamplingLedger,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `⟨μ_β|p(H)|μ_β⟩` for the expansion polynomial with exact Gibbs weights.
fn expansion_mean(spec: &Spectrum, beta: f64, e: &OperatorExpansion) -> f64 {
    let c = e.coefficients();
    let lz = spec.log_partition(beta);
    spec.values.iter().map(|l| (-beta * l - lz).exp() * clenshaw(&c, *l)).sum()
}

/// Run the three stages and combine the telescoping product.
pub fn estimate_partition(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let h0 = cfg.hamiltonian.build()?;
    let n = h0.n_qubits();
    let h = rescale(&h0, cfg.window_delta)?;
    let scale = h.scale() / h0.scale();
    let beta_r = cfg.beta * scale;
    let limits = DenseLimits::default();
    let spec = spectrum(&h, &limits)?;
    let log_z_exact = Some(spec.log_partition(beta_r));
    let z0_log = n as f64 * std::f64::consts::LN_2;
    let mut ledger = SamplingLedger::default();

    if cfg.beta == 0.0 {
        let z = 2f64.powi(n as i32);
        return Ok(RunReport {
            config: cfg.clone(),
            n_qubits: n,
            scale,
            beta_rescaled: 0.0,
            schedule: CoolingSchedule {
                target_beta: 0.0,
                c2: cfg.c2,
                betas: vec![0.0],
                certificates: vec![],
                predicate_calls: 0,
                snapshots: 0,
            },
            steps: vec![],
            gibbs_fidelity: vec![Some(1.0)],
            shots_per_point: None,
            z_hat: z,
            log_z_hat: z0_log,
            z_exact: Some(z),
            log_z_exact: Some(z0_log),
            relative_error: Some(0.0),
            ledger,
        });
    }

    // Stage 1: schedule.
    let pvgs_cfg = cfg.pvgs_config();
    let sched_cfg = cfg.schedule_config();
    let schedule = csbs(&h, beta_r, cfg.c2, &sched_cfg)?;
    ledger.schedule = schedule.snapshots;
    let betas = schedule.betas.clone();
    let l = schedule.len();

    // Stage 2: Gibbs states (only needed when shadows are collected).
    let need_states = cfg.mean_mode == MeanMode::Shadow;
    let mut fidelity = vec![None; betas.len()];
    let states: Vec<StateVector> = if !need_states {
        vec![]
    } else {
        match cfg.gibbs_mode {
            GibbsMode::Oracle => {
                fidelity = vec![Some(1.0); betas.len()];
                betas
                    .iter()
                    .map(|b| Ok(gibbs_from_spectrum(&spec, *b)?.state))
                    .collect::<Result<_>>()?
            }
            GibbsMode::Pvgs => {
                let ev = evolve(&h, &betas, &pvgs_cfg)?;
                ledger.gibbs = ev.total_snapshots();
                let mut out = Vec::new();
                for (i, s) in ev.samples.into_iter().enumerate() {
                    let oracle = gibbs_from_spectrum(&spec, betas[i])?;
                    fidelity[i] = Some(oracle.state.overlap(&s.state)?);
                    out.push(s.state);
                }
                out
            }
        }
    };

    // Stage 3: mean values.
    let ds: Vec<f64> = betas.windows(2).map(|w| 0.5 * (w[1] - w[0])).collect();
    let expansions: Vec<(OperatorExpansion, OperatorExpansion)> = if cfg.mean_mode == MeanMode::Exact {
        vec![]
    } else {
        ds.iter()
            .map(|d| Ok((build_expansion(*d, cfg.window_delta, cfg.eps4)?, build_expansion(-*d, cfg.window_delta, cfg.eps4)?)))
            .collect::<Result<_>>()?
    };
    let shots = if cfg.mean_mode == MeanMode::Shadow {
        Some(match cfg.shots {
            Some(m) => m,
            None => {
                let rel: Vec<f64> = schedule
                    .betas
                    .windows(2)
                    .flat_map(|w| {
                        let f = crate::schedule::exact_overlap(&spec, w[0], w[1]);
                        [1.0 / f, 1.0 / f]
                    })
                    .collect();
                product_mean_bound_check(&rel, cfg.eps3, cfg.delta3)?
            }
        })
    } else {
        None
    };
    let shadows = match shots {
        None => vec![],
        Some(m) => {
            let opts = ShadowOptions {
                locality: cfg.locality,
                register_qubits: match cfg.register {
                    Register::Doubled => None,
                    Register::First => Some(n),
                },
                label: String::new(),
            };
            let mut out = Vec::new();
            for (i, psi) in states.iter().enumerate() {
                let opts = ShadowOptions {
                    label: format!("beta_{i}={}", betas[i]),
                    ..opts.clone()
                };
                out.push(collect_shadow_with(psi, m, derive_seed(cfg.seed, 1000 + i as u64), &opts)?);
                ledger.mean_values += m;
            }
            out
        }
    };
    let mm = shots.map(|m| MMConfig::new(m, cfg.group_count().min(m))).transpose()?;

    let mut steps = Vec::with_capacity(l);
    let mut log_ratio = 0.0;
    for i in 0..l {
        let (b0, b1, d) = (betas[i], betas[i + 1], ds[i]);
        let ev_exact = exp_mean_from_spectrum(&spec, b0, d);
        let ew_exact = exp_mean_from_spectrum(&spec, b1, -d);
        let (ev, ew, degree) = match cfg.mean_mode {
            MeanMode::Exact => (ev_exact, ew_exact, None),
            MeanMode::Expansion => {
                let (pv, pw) = &expansions[i];
                (expansion_mean(&spec, b0, pv), expansion_mean(&spec, b1, pw), Some(pv.degree().max(pw.degree())))
            }
            MeanMode::Shadow => {
                let (pv, pw) = &expansions[i];
                let mm = mm.expect("shadow mode has a budget");
                let ev = estimate_exp_mean(&shadows[i], &h, pv, mm, cfg.term_cap)?;
                let ew = estimate_exp_mean(&shadows[i + 1], &h, pw, mm, cfg.term_cap)?;
                (ev, ew, Some(pv.degree().max(pw.degree())))
            }
        };
        if !(ev > 0.0 && ew > 0.0) {
            return Err(Error::Numerical(format!(
                "non-positive mean-value estimate at step {i}: E[V]={ev}, E[W]={ew}; increase shots"
            )));
        }
        log_ratio += ev.ln() - ew.ln();
        steps.push(StepReport {
            beta_index: i,
            beta: b0,
            d,
            ev,
            ew,
            ev_exact: Some(ev_exact),
            ew_exact: Some(ew_exact),
            expansion_degree: degree,
        });
    }
    ledger.total = ledger.schedule + ledger.gibbs + ledger.mean_values;
    let log_z_hat = z0_log + log_ratio;
    let z_hat = log_z_hat.exp();
    let z_exact = log_z_exact.map(f64::exp);
    let relative_error = log_z_exact.map(|lz| (log_z_hat - lz).exp_m1().abs());
    Ok(RunReport {
        config: cfg.clone(),
        n_qubits: n,
        scale,
        beta_rescaled: beta_r,
        schedule,
        steps,
        gibbs_fidelity: fidelity,
        shots_per_point: shots,
        z_hat,
        log_z_hat,
        z_exact,
        log_z_exact,
        relative_error,
        ledger,
    })
}
