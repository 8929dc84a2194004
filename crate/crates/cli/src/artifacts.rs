//! On-disk artifacts: config copy, statistics CSV, ensemble JSON, test
//! report JSON, optional trajectory dumps, and the run manifest.
//!
//! Everything except the manifest (which carries timestamps) is a pure
//! function of the config and seed, so a rerun produces byte-identical
//! files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use urnlab_core::pd::pd_simulate;
use urnlab_core::report::{pd_trajectory_csv, statistics_csv, urn_trajectory_csv};
use urnlab_core::stable::Ensemble;
use urnlab_core::urn::{simulate, simulate_multicolor};

use crate::config::{ExperimentConfig, ResolvedExperiment, ResolvedModel};
use crate::runner::{RunError, TestReport};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a 64-bit hash, hex-encoded. Integrity marker for the stored config,
/// recomputable from the file bytes.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub tests: Vec<TestOutcome>,
    pub files: Vec<String>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Writes the full artifact set for a completed run and returns the
/// manifest. `started_ms` is captured by the caller before simulation.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    rx: &ResolvedExperiment,
    ensemble: &Ensemble,
    reports: &[TestReport],
    started_ms: u64,
) -> Result<(RunManifest, PathBuf), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Other(format!("create {dir:?}: {e}")))?;
    let mut files = Vec::new();

    let config_json = serde_json::to_string_pretty(config)
        .map_err(|e| RunError::Other(format!("serialize config: {e}")))?;
    write_file(dir, "config.json", config_json.as_bytes(), &mut files)?;
    let config_hash = fnv1a64_hex(config_json.as_bytes());

    let stats = statistics_csv(ensemble);
    write_file(dir, "statistics.csv", stats.as_bytes(), &mut files)?;

    let ensemble_json = serde_json::to_string(ensemble)
        .map_err(|e| RunError::Other(format!("serialize ensemble: {e}")))?;
    write_file(dir, "ensemble.json", ensemble_json.as_bytes(), &mut files)?;

    let report_json = serde_json::to_string_pretty(reports)
        .map_err(|e| RunError::Other(format!("serialize reports: {e}")))?;
    write_file(dir, "report.json", report_json.as_bytes(), &mut files)?;

    // Trajectory dumps re-simulate the first replications; determinism makes
    // this identical to what the main pass saw.
    for rep in 0..rx.dump_trajectories.min(rx.replications) {
        let csv = match &rx.model {
            ResolvedModel::TwoColor(config) => {
                urn_trajectory_csv(&simulate(config, rx.master_seed, rep, &rx.options)?)
            }
            ResolvedModel::Multicolor(config) => {
                urn_trajectory_csv(&simulate_multicolor(config, rx.master_seed, rep, &rx.options)?)
            }
            ResolvedModel::PoissonDirichlet(config) => {
                pd_trajectory_csv(&pd_simulate(config, rx.master_seed, rep, &rx.options)?)
            }
        };
        write_file(dir, &format!("trajectory_{rep:06}.csv"), csv.as_bytes(), &mut files)?;
    }

    let manifest = RunManifest {
        config_hash,
        artifact_version: ARTIFACT_VERSION.to_string(),
        started_unix_ms: started_ms,
        finished_unix_ms: now_ms(),
        tests: reports
            .iter()
            .map(|r| TestOutcome {
                name: r.name(),
                pass: r.pass(),
            })
            .collect(),
        files,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError::Other(format!("serialize manifest: {e}")))?;
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, manifest_json)
        .map_err(|e| RunError::Other(format!("write {manifest_path:?}: {e}")))?;
    Ok((manifest, manifest_path))
}

fn write_file(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    files: &mut Vec<String>,
) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| RunError::Other(format!("write {path:?}: {e}")))?;
    files.push(name.to_string());
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, RunError> {
    let path = dir.join("manifest.json");
    let text =
        fs::read_to_string(&path).map_err(|e| RunError::Other(format!("read {path:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| RunError::Other(format!("parse {path:?}: {e}")))
}

pub fn load_ensemble(dir: &Path) -> Result<Ensemble, RunError> {
    let path = dir.join("ensemble.json");
    let text =
        fs::read_to_string(&path).map_err(|e| RunError::Other(format!("read {path:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| RunError::Other(format!("parse {path:?}: {e}")))
}

pub fn load_config(dir: &Path) -> Result<ExperimentConfig, RunError> {
    let path = dir.join("config.json");
    let text =
        fs::read_to_string(&path).map_err(|e| RunError::Other(format!("read {path:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| RunError::Other(format!("parse {path:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv1a64_hex(b"a"), "af63dc4c8601ec8c");
        // Hash changes for any byte flip.
        assert_ne!(fnv1a64_hex(b"abc"), fnv1a64_hex(b"abd"));
    }
}
