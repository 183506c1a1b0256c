//! Run records and deterministic persistence.
//!
//! `run.json` is reproducible byte-for-byte between identical runs except for
//! the single `timestamp` field, which gathers everything volatile (wall
//! clock, timings). The run id is a hash of the effective configuration, so
//! identical configs share an id.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use microdrift_core::drift::{DriftReport, SweepResult};
use microdrift_core::integrator::Trajectory;
use microdrift_core::normal_form::LemmaEstimates;

#[derive(Debug, Default, Serialize)]
pub struct Reports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<(u32, f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_form: Option<LemmaEstimates>,
}

/// Volatile data lives under one key so determinism checks can strip it.
#[derive(Debug, Default, Serialize)]
pub struct Volatile {
    pub completed_unix_ms: u128,
    pub timings_ms: BTreeMap<String, u128>,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub reports: Reports,
    pub timestamp: Volatile,
}

impl RunRecord {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update(config.to_string().as_bytes());
        let digest = hasher.finalize();
        let run_id: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        RunRecord {
            run_id,
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            reports: Reports::default(),
            timestamp: Volatile::default(),
        }
    }

    pub fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        self.timestamp.timings_ms.insert(label.to_string(), start.elapsed().as_millis());
        out
    }

    /// Write `run.json` plus one CSV per report into `dir`.
    pub fn persist(&mut self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.timestamp.completed_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written = Vec::new();
        let json = serde_json::to_string_pretty(self)?;
        written.push(write_atomic(&dir.join("run.json"), json.as_bytes())?);
        if let Some(table) = &self.reports.psi {
            written.push(write_atomic(&dir.join("psi.csv"), psi_csv(table).as_bytes())?);
        }
        if let Some(sweep) = &self.reports.sweep {
            written
                .push(write_atomic(&dir.join("sweep.csv"), sweep_csv(&sweep.reports).as_bytes())?);
        }
        if let Some(nf) = &self.reports.normal_form {
            written.push(write_atomic(&dir.join("nf.csv"), nf_csv(nf).as_bytes())?);
        }
        Ok(written)
    }
}

/// Write via a temporary file and rename, so interrupted runs never leave a
/// partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{}.tmp-{}", name, std::process::id()));
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn psi_csv(table: &[(u32, f64, f64)]) -> String {
    let mut out = String::from("Q,min_divisor,psi\n");
    for (q, min_div, psi) in table {
        out.push_str(&format!("{q},{min_div},{psi}\n"));
    }
    out
}

pub fn sweep_csv(reports: &[DriftReport]) -> String {
    let mut out =
        String::from("eps,mu,tau,drift_total,drift_along,drift_transverse,threshold,pass\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.eps, r.mu, r.tau, r.total, r.along_lambda, r.transverse, r.threshold, r.pass
        ));
    }
    out
}

pub fn nf_csv(table: &LemmaEstimates) -> String {
    let mut out = String::from(
        "eps,mu,sup_displacement,sup_dtheta,sup_dI,bound_displacement,bound_dtheta,bound_dI,\
         ratio_displacement,ratio_dtheta,ratio_dI\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.eps,
            r.mu,
            r.sup_displacement,
            r.sup_dtheta,
            r.sup_dactions,
            r.bound_displacement,
            r.bound_dtheta,
            r.bound_dactions,
            r.ratio_displacement,
            r.ratio_dtheta,
            r.ratio_dactions
        ));
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.samples.first().map(|s| s.theta.len()).unwrap_or(0);
    let mut header = String::from("t");
    for j in 1..=n {
        header.push_str(&format!(",theta_{j}"));
    }
    for j in 1..=n {
        header.push_str(&format!(",I_{j}"));
    }
    header.push_str(",energy\n");
    let mut out = header;
    for (state, energy) in traj.samples.iter().zip(&traj.energies) {
        out.push_str(&format!("{}", state.t));
        for v in &state.theta {
            out.push_str(&format!(",{v}"));
        }
        for v in &state.actions {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{energy}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_ids_depend_only_on_config() {
        let a = RunRecord::new("sweep", serde_json::json!({"eps": 1e-4}));
        let b = RunRecord::new("sweep", serde_json::json!({"eps": 1e-4}));
        let c = RunRecord::new("sweep", serde_json::json!({"eps": 1e-5}));
        assert_eq!(a.run_id, b.run_id);
        assert_ne!(a.run_id, c.run_id);
    }

    #[test]
    fn csv_headers_are_stable() {
        assert!(psi_csv(&[]).starts_with("Q,min_divisor,psi\n"));
        assert!(sweep_csv(&[])
            .starts_with("eps,mu,tau,drift_total,drift_along,drift_transverse,threshold,pass\n"));
    }
}
