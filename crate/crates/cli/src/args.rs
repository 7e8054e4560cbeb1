//! Command-line argument definitions.
//!
//! Every optional flag serializes under the matching config key, so a
//! `--config` JSON file and explicit flags merge into one object with the
//! flags taking precedence.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "thermoshadow", version, about = "Partition-function estimation from classical shadows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and estimate Z(beta).
    Partition(RunArgs),
    /// Build a cooling schedule only.
    Schedule(RunArgs),
    /// Run variational imaginary-time evolution and log fidelity.
    Gibbs(RunArgs),
    /// Compare shadow overlap estimates with exact values on random pairs.
    Overlap(OverlapArgs),
    /// Build and certify a Chebyshev expansion of exp(-d x).
    Expansion(ExpansionArgs),
    /// Run the oracle cross-check suite.
    Validate(ValidateArgs),
}

/// Output location shared by all subcommands.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file; explicit flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for the JSON report and CSV series.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Hamiltonian selection; assembled into the `hamiltonian` config object.
#[derive(Debug, Args, Serialize)]
pub struct HamiltonianArgs {
    /// ising, diagonal, hubbard or file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// periodic or open (Ising only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_b: Option<usize>,
    /// Hubbard hopping amplitude.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Hubbard on-site interaction.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    /// Hamiltonian text file (family `file`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Flags mirroring the run configuration.
#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(skip)]
    pub hamiltonian: HamiltonianArgs,
    /// Exact schedule, oracle Gibbs states and exact mean values.
    #[arg(long)]
    #[serde(skip)]
    pub exact_all: bool,
    /// Shadow locality: `global` or `local:<k>`.
    #[arg(long)]
    #[serde(skip)]
    pub locality: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps3: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps4: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta3: Option<f64>,
    /// Spectral window margin used when rescaling H.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_delta: Option<f64>,
    /// exact or shadow.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_all_pairs: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    /// oracle or pvgs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs_mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_beta: Option<f64>,
    /// exact, expansion or shadow.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_mode: Option<String>,
    /// Snapshots per schedule point; omitted means the bound-sized budget.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    /// doubled or first.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub register: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term_cap: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct OverlapArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// diagonal or ising.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    /// Inverse temperatures are drawn from [0, beta_max].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    /// Average over all cross pairs of snapshots.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_pairs: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpansionArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}
