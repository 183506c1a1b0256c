//! Experiment configuration files: a full run description with schema
//! validation, strict unknown-key rejection, and defaults (`kappa = 1`,
//! `mu0 = 0.1`).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use microdrift_core::hamiltonian::NearIntegrableSystem;
use microdrift_core::io::{ResonanceDef, SystemDef};
use microdrift_core::resonance::ResonanceData;

fn default_kappa() -> f64 {
    1.0
}

fn default_mu0() -> f64 {
    0.1
}

fn default_samples() -> usize {
    2000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance: Option<ResonanceDef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance_path: Option<PathBuf>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u32>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// `start:end:count`, log-spaced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_decades: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub phase_sweep: u32,
    /// Initial transverse angles for drift runs (length `n - d`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transverse: Option<Vec<f64>>,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            system: None,
            system_path: None,
            resonance: None,
            resonance_path: None,
            kappa: default_kappa(),
            mu0: default_mu0(),
            q_max: None,
            samples: default_samples(),
            seed: 0,
            eps: None,
            eps_decades: None,
            eps_list: None,
            phase_sweep: 0,
            transverse: None,
        }
    }
}

/// Parse and validate a config file. Inline definitions are checked by
/// actually constructing the objects they describe; unknown keys and
/// malformed values are rejected with their location.
pub fn load_config(path: &Path) -> Result<LabConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: LabConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))?;
    if config.system.is_some() && config.system_path.is_some() {
        bail!("config gives both `system` and `system_path`");
    }
    if config.resonance.is_some() && config.resonance_path.is_some() {
        bail!("config gives both `resonance` and `resonance_path`");
    }
    // negated comparisons reject NaN as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(config.kappa > 0.0) {
        bail!("kappa must be positive, got {}", config.kappa);
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(config.mu0 > 0.0) {
        bail!("mu0 must be positive, got {}", config.mu0);
    }
    if let Some(def) = &config.system {
        def.to_system().context("invalid inline system definition")?;
    }
    if let Some(def) = &config.resonance {
        def.to_resonance().context("invalid inline resonance definition")?;
    }
    if let Some(spec) = &config.eps_decades {
        parse_eps_decades(spec)?;
    }
    Ok(config)
}

impl LabConfig {
    /// The system definition as written, for record snapshots.
    pub fn resolve_system_def(&self, flag: Option<&Path>) -> Result<SystemDef> {
        let path = match (flag, &self.system, &self.system_path) {
            (Some(p), _, _) => p.to_path_buf(),
            (None, Some(def), _) => return Ok(def.clone()),
            (None, None, Some(p)) => p.clone(),
            _ => bail!("no system given: pass --system or put one in the config file"),
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read system {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid system {}", path.display()))
    }

    pub fn resolve_resonance_def(&self, flag: Option<&Path>) -> Result<ResonanceDef> {
        let path = match (flag, &self.resonance, &self.resonance_path) {
            (Some(p), _, _) => p.to_path_buf(),
            (None, Some(def), _) => return Ok(def.clone()),
            (None, None, Some(p)) => p.clone(),
            _ => bail!("no resonance given: pass --resonance or put one in the config file"),
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read resonance {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("invalid resonance {}", path.display()))
    }

    pub fn resolve_system(&self, flag: Option<&Path>) -> Result<NearIntegrableSystem> {
        Ok(self.resolve_system_def(flag)?.to_system()?)
    }

    pub fn resolve_resonance(&self, flag: Option<&Path>) -> Result<ResonanceData> {
        Ok(self.resolve_resonance_def(flag)?.to_resonance()?)
    }
}

/// Parse `start:end:count` into a log-spaced grid.
pub fn parse_eps_decades(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("eps range must look like 1e-2:1e-6:9, got {spec:?}");
    }
    let hi: f64 = parts[0].parse().with_context(|| format!("bad start {:?}", parts[0]))?;
    let lo: f64 = parts[1].parse().with_context(|| format!("bad end {:?}", parts[1]))?;
    let count: usize = parts[2].parse().with_context(|| format!("bad count {:?}", parts[2]))?;
    if !(hi > 0.0 && lo > 0.0) || count < 2 {
        bail!("eps range needs positive endpoints and at least 2 points");
    }
    Ok(microdrift_core::drift::log_spaced(hi, lo, count))
}

/// Comma-separated float list.
pub fn parse_float_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_parsers() {
        let g = parse_eps_decades("1e-2:1e-6:9").unwrap();
        assert_eq!(g.len(), 9);
        assert!(parse_eps_decades("1e-2:1e-6").is_err());
        assert_eq!(parse_float_list("1e-3, 1e-4").unwrap(), vec![1e-3, 1e-4]);
    }
}
