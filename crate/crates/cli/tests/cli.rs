//! End-to-end checks of the `urnlab` binary: exit codes, artifact layout,
//! rerun byte-identity, and the report/oracle/pd subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn urnlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_urnlab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("urnlab-cli-{}-{name}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn minimal_config(tests: &str) -> String {
    format!(
        r#"{{
  "model": {{
    "type": "two_color",
    "initial_black": 1.0,
    "initial_red": 1.0,
    "black": {{"tail": {{"uniform_discrete": {{"values": [1.0, 2.0, 3.0]}}}}}},
    "red": {{"tail": {{"uniform_discrete": {{"values": [1.0, 2.0, 3.0]}}}}}}
  }},
  "replications": 200,
  "horizon": 4000,
  "stat_checkpoints": [200],
  "storage": "dense",
  "master_seed": 97,
  "tests": {tests}
}}"#
    )
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn urnlab")
}

#[test]
fn simulate_writes_artifacts_and_exits_zero() {
    let dir = scratch("simulate");
    let config = write_config(&dir, "config.json", &minimal_config("[]"));
    let out_dir = dir.join("run");
    let output = run(urnlab()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir));
    assert!(output.status.success(), "{output:?}");
    for name in ["config.json", "statistics.csv", "ensemble.json", "report.json", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    // The manifest's config hash is recomputable from the stored bytes.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let stored = fs::read(out_dir.join("config.json")).unwrap();
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        urnlab_cli::artifacts::fnv1a64_hex(&stored)
    );
    let stats = fs::read_to_string(out_dir.join("statistics.csv")).unwrap();
    assert!(stats.starts_with(
        "replication_id,n,c_n,d_n,w_n,a_stat,b_stat,c_stat,d_stat,n_over_s\n"
    ));
    assert_eq!(stats.lines().count(), 1 + 200);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = scratch("rerun");
    let config = write_config(&dir, "config.json", &minimal_config("[]"));
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.join(name);
        let output = run(urnlab()
            .arg("simulate")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir));
        assert!(output.status.success());
        bytes.push((
            fs::read(out_dir.join("statistics.csv")).unwrap(),
            fs::read(out_dir.join("ensemble.json")).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn config_error_exits_two_and_names_the_field() {
    let dir = scratch("bad-config");
    let mut body = minimal_config("[]");
    body = body.replace("\"stat_checkpoints\": [200]", "\"stat_checkpoints\": [9999]");
    let config = write_config(&dir, "config.json", &body);
    let output = run(urnlab().arg("simulate").arg("--config").arg(&config));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("stat_checkpoints"), "stderr: {stderr}");
    assert!(stderr.contains("9999"), "stderr: {stderr}");
}

#[test]
fn missing_config_file_exits_two() {
    let output = run(urnlab()
        .arg("simulate")
        .arg("--config")
        .arg("/nonexistent/config.json"));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn failing_test_exits_one() {
    let dir = scratch("failing");
    // An impossible tolerance forces a clean verification failure.
    let config = write_config(
        &dir,
        "config.json",
        &minimal_config(r#"[{"kind": "s_over_n", "n": 4000, "tolerance": 1e-12}]"#),
    );
    let output = run(urnlab()
        .arg("verify")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("run")));
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("FAIL"), "stdout: {stdout}");
}

#[test]
fn verify_from_stored_run_matches_fresh_run() {
    let dir = scratch("verify-stored");
    let config = write_config(
        &dir,
        "config.json",
        &minimal_config(r#"[{"kind": "s_over_n", "n": 4000, "tolerance": 0.05}]"#),
    );
    let out_dir = dir.join("run");
    let fresh = run(urnlab()
        .arg("verify")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir));
    assert!(fresh.status.success(), "{fresh:?}");
    let stored = run(urnlab().arg("verify").arg("--from").arg(&out_dir));
    assert!(stored.status.success(), "{stored:?}");
}

#[test]
fn report_emits_plot_data() {
    let dir = scratch("report");
    let config = write_config(&dir, "config.json", &minimal_config("[]"));
    let out_dir = dir.join("run");
    assert!(run(urnlab()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir))
    .status
    .success());
    let output = run(urnlab().arg("report").arg("--from").arg(&out_dir));
    assert!(output.status.success(), "{output:?}");
    let plots = out_dir.join("plots");
    for name in [
        "hist_w_n200.csv",
        "quantiles_w_n200.csv",
        "dstat_vs_v.csv",
        "n_over_s.csv",
    ] {
        assert!(plots.join(name).exists(), "missing {name}");
    }
    let hist = fs::read_to_string(plots.join("hist_w_n200.csv")).unwrap();
    assert!(hist.starts_with("slice,bin_low,bin_high,mass\n"));

    // Missing artifacts: exit 2.
    let missing = run(urnlab().arg("report").arg("--from").arg(dir.join("nope")));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn trajectory_dump_has_documented_shape() {
    let dir = scratch("dump");
    let body = minimal_config("[]").replace(
        "\"master_seed\": 97",
        "\"master_seed\": 97,\n  \"dump_trajectories\": 2",
    );
    let config = write_config(&dir, "config.json", &body);
    let out_dir = dir.join("run");
    assert!(run(urnlab()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir))
    .status
    .success());
    for rep in 0..2 {
        let path = out_dir.join(format!("trajectory_{rep:06}.csv"));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,color,reinforcement,z_1,z_2,s_k\n"), "{path:?}");
    }
    assert!(!out_dir.join("trajectory_000002.csv").exists());
}

#[test]
fn oracle_command_checks_small_horizons() {
    let dir = scratch("oracle");
    let body = minimal_config("[]").replace(
        "\"uniform_discrete\": {\"values\": [1.0, 2.0, 3.0]}",
        "\"constant\": {\"value\": 1.0}",
    );
    let config = write_config(&dir, "config.json", &body);
    let output = run(urnlab()
        .arg("oracle")
        .arg("--config")
        .arg(&config)
        .arg("--n")
        .arg("1,2")
        .arg("--replications")
        .arg("20000"));
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.matches("pass").count(), 2, "stdout: {stdout}");
}

#[test]
fn pd_preset_runs() {
    let dir = scratch("pd");
    let output = run(urnlab()
        .arg("pd")
        .arg("--preset")
        .arg("dirichlet-binary")
        .arg("--replications")
        .arg("300")
        .arg("--horizon")
        .arg("5000")
        .arg("--out")
        .arg(dir.join("run")));
    assert!(output.status.success(), "{output:?}");
    assert!(dir.join("run").join("manifest.json").exists());

    let unknown = run(urnlab().arg("pd").arg("--preset").arg("no-such-preset"));
    assert_eq!(unknown.status.code(), Some(2));
}
