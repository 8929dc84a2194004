//! Subcommand implementations. Exit codes: 0 success, 1 at least one
//! verification test failed, 2 configuration or usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use urnlab_core::stable::SliceTestConfig;
use urnlab_core::urn::enumerate_exact;
use urnlab_core::urn::{simulate, SimOptions};

use crate::artifacts;
use crate::config::{ExperimentConfig, ResolvedExperiment, ResolvedModel, TestSpec};
use crate::plots;
use crate::runner::{self, RunError, TestReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_TEST_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

pub struct Outcome {
    pub exit_code: u8,
    pub messages: Vec<String>,
}

impl Outcome {
    fn ok(messages: Vec<String>) -> Self {
        Self {
            exit_code: EXIT_OK,
            messages,
        }
    }

    fn config_error(message: String) -> Self {
        Self {
            exit_code: EXIT_CONFIG,
            messages: vec![message],
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn load_experiment(
    path: &Path,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<(ExperimentConfig, ResolvedExperiment, PathBuf), Outcome> {
    let text = fs::read_to_string(path)
        .map_err(|e| Outcome::config_error(format!("cannot read config {path:?}: {e}")))?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| Outcome::config_error(e.to_string()))?;
    if let Some(seed) = seed_override {
        config.master_seed = seed;
    }
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("urnlab-out"));
    let resolved = config
        .resolve()
        .map_err(|e| Outcome::config_error(e.to_string()))?;
    Ok((config, resolved, out_dir))
}

fn execute_run(
    config: &ExperimentConfig,
    rx: &ResolvedExperiment,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<(Vec<TestReport>, PathBuf), RunError> {
    let started = now_ms();
    let ensemble = runner::with_thread_pool(threads, || runner::build_ensemble(rx))?;
    let reports = runner::run_tests(rx, &ensemble, &SliceTestConfig::default())?;
    let (_, manifest_path) =
        artifacts::write_run(out_dir, config, rx, &ensemble, &reports, started)?;
    Ok((reports, manifest_path))
}

fn summarize(reports: &[TestReport], messages: &mut Vec<String>) -> bool {
    let mut all_pass = true;
    for report in reports {
        let pass = report.pass();
        all_pass &= pass;
        messages.push(format!(
            "test {}: {}",
            report.name(),
            if pass { "pass" } else { "FAIL" }
        ));
    }
    all_pass
}

pub fn simulate_cmd(
    config_path: &Path,
    threads: Option<usize>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Outcome {
    let (config, rx, out_dir) = match load_experiment(config_path, seed, out) {
        Ok(v) => v,
        Err(outcome) => return outcome,
    };
    match execute_run(&config, &rx, &out_dir, threads) {
        Ok((reports, manifest_path)) => {
            let mut messages = vec![format!(
                "simulated {} replications to horizon {}; artifacts in {}",
                rx.replications,
                rx.model.horizon(),
                out_dir.display()
            )];
            let all_pass = summarize(&reports, &mut messages);
            messages.push(format!("manifest: {}", manifest_path.display()));
            Outcome {
                exit_code: if all_pass { EXIT_OK } else { EXIT_TEST_FAILURE },
                messages,
            }
        }
        Err(e) => Outcome::config_error(e.to_string()),
    }
}

pub fn verify_cmd(
    config_path: Option<&Path>,
    from: Option<&Path>,
    threads: Option<usize>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Outcome {
    match (config_path, from) {
        (Some(path), None) => simulate_cmd(path, threads, out, seed),
        (None, Some(dir)) => {
            // Rerun the stored run's test list against its stored ensemble.
            let config = match artifacts::load_config(dir) {
                Ok(c) => c,
                Err(e) => return Outcome::config_error(e.to_string()),
            };
            let rx = match config.resolve() {
                Ok(r) => r,
                Err(e) => return Outcome::config_error(e.to_string()),
            };
            let ensemble = match artifacts::load_ensemble(dir) {
                Ok(e) => e,
                Err(e) => return Outcome::config_error(e.to_string()),
            };
            match runner::run_tests(&rx, &ensemble, &SliceTestConfig::default()) {
                Ok(reports) => {
                    let mut messages = vec![format!("verified stored run {}", dir.display())];
                    let all_pass = summarize(&reports, &mut messages);
                    Outcome {
                        exit_code: if all_pass { EXIT_OK } else { EXIT_TEST_FAILURE },
                        messages,
                    }
                }
                Err(e) => Outcome::config_error(e.to_string()),
            }
        }
        _ => Outcome::config_error(
            "verify needs exactly one of --config <path> or --from <run dir>".into(),
        ),
    }
}

/// Built-in predictive-sequence presets.
pub fn pd_preset(name: &str, replications: u64, horizon: u64, master_seed: u64) -> Option<ExperimentConfig> {
    use crate::config::ModelSpec;
    let (alpha, theta, alphabet, target) = match name {
        // Classical symmetric Dirichlet pair.
        "dirichlet-binary" => (0.0, 1.0, 2, vec![0]),
        // Discounted four-symbol run with a singleton target.
        "discounted-quad" => (0.5, 1.0, 4, vec![0]),
        _ => return None,
    };
    let n = horizon / 100;
    Some(ExperimentConfig {
        model: ModelSpec::PoissonDirichlet {
            alpha,
            theta,
            base_measure: vec![1.0 / alphabet as f64; alphabet],
            target,
        },
        replications,
        horizon,
        checkpoints: crate::config::CheckpointSpec::default(),
        stat_checkpoints: if n >= 1 { vec![n] } else { vec![] },
        storage: Default::default(),
        tracked_color: 0,
        master_seed,
        // Presets bundle the scale-robust diagnostic; goodness-of-fit gates
        // belong in a full config where the user controls n and R.
        tests: vec![TestSpec::Atomlessness { window: 1e-3 }],
        output: None,
        dump_trajectories: 0,
        min_proxy_ratio: 10.0,
    })
}

pub fn pd_cmd(
    preset: &str,
    replications: u64,
    horizon: u64,
    seed: u64,
    threads: Option<usize>,
    out: Option<&Path>,
) -> Outcome {
    let Some(config) = pd_preset(preset, replications, horizon, seed) else {
        return Outcome::config_error(format!(
            "unknown preset {preset:?}; available: dirichlet-binary, discounted-quad"
        ));
    };
    let rx = match config.resolve() {
        Ok(r) => r,
        Err(e) => return Outcome::config_error(e.to_string()),
    };
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("urnlab-pd-{preset}")));
    match execute_run(&config, &rx, &out_dir, threads) {
        Ok((reports, _)) => {
            let mut messages = vec![format!(
                "preset {preset}: {} replications to horizon {horizon}; artifacts in {}",
                replications,
                out_dir.display()
            )];
            let all_pass = summarize(&reports, &mut messages);
            Outcome {
                exit_code: if all_pass { EXIT_OK } else { EXIT_TEST_FAILURE },
                messages,
            }
        }
        Err(e) => Outcome::config_error(e.to_string()),
    }
}

pub fn report_cmd(from: &Path, out: Option<&Path>) -> Outcome {
    if artifacts::load_manifest(from).is_err() {
        return Outcome::config_error(format!(
            "no run manifest found in {}; run `urnlab simulate` first",
            from.display()
        ));
    }
    let ensemble = match artifacts::load_ensemble(from) {
        Ok(e) => e,
        Err(e) => return Outcome::config_error(e.to_string()),
    };
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| from.join("plots"));
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return Outcome::config_error(format!("create {}: {e}", out_dir.display()));
    }
    let slice_config = SliceTestConfig::default();
    let mut written = Vec::new();
    for &n in ensemble.stat_ns.clone().iter() {
        let hist = match plots::histogram_csv(
            &ensemble,
            n,
            urnlab_core::stable::Statistic::W,
            ensemble.tracked_color,
            &slice_config,
        ) {
            Ok(csv) => csv,
            Err(e) => return Outcome::config_error(e.to_string()),
        };
        let quant = match plots::quantile_csv(
            &ensemble,
            n,
            urnlab_core::stable::Statistic::W,
            ensemble.tracked_color,
            &slice_config,
        ) {
            Ok(csv) => csv,
            Err(e) => return Outcome::config_error(e.to_string()),
        };
        for (name, data) in [
            (format!("hist_w_n{n}.csv"), hist),
            (format!("quantiles_w_n{n}.csv"), quant),
        ] {
            let path = out_dir.join(&name);
            if let Err(e) = fs::write(&path, data) {
                return Outcome::config_error(format!("write {path:?}: {e}"));
            }
            written.push(name);
        }
    }
    for (name, data) in [
        (
            "dstat_vs_v.csv".to_string(),
            plots::dstat_vs_v_csv(&ensemble, ensemble.tracked_color),
        ),
        ("n_over_s.csv".to_string(), plots::n_over_s_csv(&ensemble)),
    ] {
        let path = out_dir.join(&name);
        if let Err(e) = fs::write(&path, data) {
            return Outcome::config_error(format!("write {path:?}: {e}"));
        }
        written.push(name);
    }
    Outcome::ok(vec![format!(
        "wrote {} plot-data files to {}",
        written.len(),
        out_dir.display()
    )])
}

/// Compares the exact small-horizon law against the simulated one in total
/// variation. Exit 1 when any requested horizon exceeds the tolerance.
pub fn oracle_cmd(
    config_path: &Path,
    ns: &[u64],
    replications: u64,
    tolerance: f64,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Outcome {
    let (_, rx, _) = match load_experiment(config_path, seed, None) {
        Ok(v) => v,
        Err(outcome) => return outcome,
    };
    let ResolvedModel::TwoColor(config) = &rx.model else {
        return Outcome::config_error("oracle comparison needs a two_color model".into());
    };
    let mut messages = Vec::new();
    let mut all_pass = true;
    for &n in ns {
        let exact = match enumerate_exact(config, n) {
            Ok(e) => e,
            Err(e) => return Outcome::config_error(e.to_string()),
        };
        let run_cfg = urnlab_core::urn::TwoColorConfig {
            horizon: n,
            checkpoints: vec![n],
            ..config.clone()
        };
        let samples: Vec<f64> = runner::with_thread_pool(threads, || {
            use rayon::prelude::*;
            (0..replications)
                .into_par_iter()
                .map(|rep| {
                    simulate(&run_cfg, rx.master_seed, rep, &SimOptions::default())
                        .map(|t| t.terminal_z[0])
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .unwrap_or_default();
        if samples.is_empty() {
            return Outcome::config_error("oracle simulation failed".into());
        }
        let tv = exact.tv_against_z_samples(&samples);
        let pass = tv < tolerance;
        all_pass &= pass;
        messages.push(format!(
            "oracle n={n}: tv={tv:.6} ({} atoms, {} replications): {}",
            exact.atoms.len(),
            replications,
            if pass { "pass" } else { "FAIL" }
        ));
    }
    Outcome {
        exit_code: if all_pass { EXIT_OK } else { EXIT_TEST_FAILURE },
        messages,
    }
}
