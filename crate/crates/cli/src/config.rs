//! Experiment configuration: TOML file, `--set key=value` overrides, validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::registry;

/// Largest window, in vertices, an experiment may allocate.
pub const MAX_WINDOW_VERTICES: f64 = 6.0e7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Protocol {
    pub u_cap: f64,
    pub slab: f64,
    pub threshold: f64,
    pub tol: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol { u_cap: 4.0, slab: 0.25, threshold: 0.5, tol: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub d: usize,
    pub u: Option<f64>,
    pub u_grid: Vec<f64>,
    /// Second intensity, e.g. the larger field of `ξ(N, α, β)`.
    pub u2: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<i64>,
    #[serde(rename = "L")]
    pub l: Vec<u64>,
    pub eps: f64,
    /// Interpolation time of `χ_t`.
    pub time: f64,
    pub k0: Vec<i64>,
    pub j1: u64,
    pub b: Vec<f64>,
    pub k_max: u32,
    pub trials: u64,
    pub seed: u64,
    pub shards: usize,
    pub intrusion_tol: f64,
    pub output: Option<PathBuf>,
    pub trace_dump: Option<PathBuf>,
    pub protocol: Protocol,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            d: 3,
            u: None,
            u_grid: Vec::new(),
            u2: None,
            t: 1.0,
            t_grid: Vec::new(),
            r: vec![4],
            l: vec![2],
            eps: 0.2,
            time: 0.5,
            k0: vec![4, 6],
            j1: 100,
            b: vec![1.25, 2.0],
            k_max: 30,
            trials: 1000,
            seed: 1,
            shards: 4,
            intrusion_tol: fri_core::fri_process::DEFAULT_INTRUSION_TOL,
            output: None,
            trace_dump: None,
            protocol: Protocol::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Toml(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Parses the config text and applies `key=value` overrides (dotted keys
/// reach into sections; values are TOML, bare words are taken as strings).
pub fn load(text: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = match text {
        Some(t) => t.parse().map_err(|e: toml::de::Error| ConfigError::Toml(e.to_string()))?,
        None => toml::Table::new(),
    };
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| ConfigError::Override(o.clone()))?;
        let mut cur = &mut table;
        for p in parts {
            cur = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| ConfigError::Override(o.clone()))?;
        }
        cur.insert(last.to_string(), value);
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Toml(e.to_string()))
}

pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(to_toml(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

pub fn validate(cfg: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    let Some(exp) = registry::find(&cfg.experiment) else {
        d.errors.push(format!("unknown experiment {:?}; see `fri-lab list`", cfg.experiment));
        return d;
    };
    if !(1..=fri_core::lattice::MAX_DIM).contains(&cfg.d) {
        d.errors.push(format!("d = {} outside 1..={}", cfg.d, fri_core::lattice::MAX_DIM));
    } else if cfg.d < 3 {
        d.warnings.push(format!("d = {}: theory requires d >= 3", cfg.d));
    }
    if cfg.shards == 0 {
        d.errors.push("shards must be at least 1".into());
    }
    if !(positive(cfg.intrusion_tol) && cfg.intrusion_tol < 1.0) {
        d.errors.push(format!("intrusion_tol = {} outside (0, 1)", cfg.intrusion_tol));
    }
    if !positive(cfg.t) {
        d.errors.push(format!("T = {} must be positive", cfg.t));
    }
    if cfg.t_grid.iter().any(|&t| !positive(t)) {
        d.errors.push("T_grid entries must be positive".into());
    }
    if cfg.t_grid.windows(2).any(|w| w[0] >= w[1]) {
        d.errors.push("T_grid must be strictly increasing".into());
    }
    if cfg.u.is_some_and(|u| !(u.is_finite() && u >= 0.0)) || cfg.u_grid.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
        d.errors.push("intensities must be finite and non-negative".into());
    }
    if cfg.u_grid.windows(2).any(|w| w[0] >= w[1]) {
        d.errors.push("u_grid must be strictly increasing".into());
    }
    if !(0.0..=1.0).contains(&cfg.eps) {
        d.errors.push(format!("eps = {} outside [0, 1]", cfg.eps));
    }
    if cfg.r.iter().any(|&r| r < 1) {
        d.errors.push("R entries must be at least 1".into());
    }
    let p = &cfg.protocol;
    if !(positive(p.u_cap) && positive(p.slab) && positive(p.tol) && p.threshold > 0.0 && p.threshold < 1.0) {
        d.errors.push("protocol needs positive u_cap, slab, tol and threshold in (0, 1)".into());
    }
    for field in exp.required {
        let missing = match *field {
            "u" => cfg.u.is_none(),
            "u_grid" => cfg.u_grid.is_empty(),
            "u2" => cfg.u2.is_none(),
            "T_grid" => cfg.t_grid.is_empty(),
            "R" => cfg.r.is_empty(),
            "L" => cfg.l.is_empty(),
            "k0" => cfg.k0.is_empty(),
            "b" => cfg.b.is_empty(),
            _ => false,
        };
        if missing {
            d.errors.push(format!("{} needs `{field}`", exp.name));
        }
    }
    if let Some(&r) = cfg.r.iter().max() {
        let extra_l = if exp.window_adds_l { cfg.l.iter().copied().max().unwrap_or(0) as f64 } else { 0.0 };
        let radius = exp.window_factor * r as f64 + extra_l;
        let padded = 2.0 * radius + 1.0;
        if padded.powi(cfg.d as i32) > MAX_WINDOW_VERTICES {
            d.errors.push(format!("R = {r} needs a window of radius {radius}, beyond capacity in d = {}", cfg.d));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_sections() {
        let cfg = load(Some("experiment = \"osss\"\n[protocol]\nslab = 0.5\n"), &["protocol.tol=0.01".into(), "R=[3]".into()]).unwrap();
        assert_eq!(cfg.protocol.slab, 0.5);
        assert_eq!(cfg.protocol.tol, 0.01);
        assert_eq!(cfg.r, vec![3]);
    }

    #[test]
    fn round_trip_revalidates() {
        let cfg = load(None, &["experiment=osss".into(), "u=0.3".into()]).unwrap();
        let again = load(Some(&to_toml(&cfg)), &[]).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(validate(&cfg), validate(&again));
        assert_eq!(config_hash(&cfg), config_hash(&again));
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(load(Some("bogus = 1"), &[]).is_err());
    }
}
