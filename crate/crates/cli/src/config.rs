//! Merging of `--config` JSON files with command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thermoshadow::pipeline::RunConfig;
use thermoshadow::{Error, Result};

use crate::args::{Common, RunArgs};

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn load_base(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text).map_err(config_err)? {
        Value::Object(m) => Ok(m),
        _ => Err(config_err("config file must hold a JSON object")),
    }
}

fn overlay(base: &mut Map<String, Value>, flags: Value) {
    if let Value::Object(m) = flags {
        base.extend(m);
    }
}

fn locality_value(text: &str) -> Result<Value> {
    if text == "global" {
        return Ok(json!("global"));
    }
    let k = text
        .strip_prefix("local:")
        .and_then(|k| k.parse::<usize>().ok())
        .ok_or_else(|| config_err(format!("locality must be `global` or `local:<k>`, got {text}")))?;
    Ok(json!({ "local": k }))
}

/// Run configuration from an optional JSON file overlaid with flags.
pub fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut obj = load_base(args.common.config.as_deref())?;
    let ham = serde_json::to_value(&args.hamiltonian).map_err(config_err)?;
    if ham.as_object().is_some_and(|m| !m.is_empty()) {
        let mut h = match obj.remove("hamiltonian") {
            // A new family replaces the file's Hamiltonian entirely.
            Some(Value::Object(m)) if args.hamiltonian.family.is_none() => m,
            _ => Map::new(),
        };
        overlay(&mut h, ham);
        obj.insert("hamiltonian".into(), Value::Object(h));
    }
    overlay(&mut obj, serde_json::to_value(args).map_err(config_err)?);
    if let Some(l) = &args.locality {
        obj.insert("locality".into(), locality_value(l)?);
    }
    if args.exact_all {
        obj.insert("schedule_mode".into(), json!("exact"));
        obj.insert("gibbs_mode".into(), json!("oracle"));
        obj.insert("mean_mode".into(), json!("exact"));
    }
    RunConfig::from_json(&Value::Object(obj).to_string())
}

/// Any other subcommand configuration: file keys overlaid with flags.
pub fn merged<T: DeserializeOwned, F: Serialize>(common: &Common, flags: &F) -> Result<T> {
    let mut obj = load_base(common.config.as_deref())?;
    overlay(&mut obj, serde_json::to_value(flags).map_err(config_err)?);
    serde_json::from_value(Value::Object(obj)).map_err(config_err)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default)]
    pub all_pairs: bool,
    pub seed: u64,
}

fn default_family() -> String {
    "diagonal".into()
}
fn default_n() -> usize {
    6
}
fn default_pairs() -> usize {
    20
}
fn default_shots() -> usize {
    1000
}
fn default_beta_max() -> f64 {
    2.0
}

impl OverlapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 || self.shots == 0 {
            return Err(config_err("pairs and shots must be >= 1"));
        }
        if !(self.beta_max > 0.0 && self.beta_max.is_finite()) {
            return Err(config_err("beta_max must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    pub d: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_delta() -> f64 {
    0.2
}
fn default_eps() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default)]
    pub seed: u64,
}
