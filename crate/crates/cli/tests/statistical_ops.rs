//! Heavier statistical checks of the ensemble machinery on real urn runs.

use urnlab_cli::config::{CheckpointSpec, ExperimentConfig, LawSpec, ModelSpec, ScheduleSpec};
use urnlab_cli::runner::build_ensemble;
use urnlab_core::stable::{joint_product_test, sample_kernel, SliceTestConfig, Statistic};
use urnlab_core::streams::StreamKey;
use urnlab_core::urn::StorageMode;

fn uniform123() -> ScheduleSpec {
    ScheduleSpec {
        head: vec![],
        tail: LawSpec::UniformDiscrete {
            values: vec![1.0, 2.0, 3.0],
        },
    }
}

#[test]
fn joint_product_holds_on_reinforced_urn() {
    // The studentized (C, D) pair is uncorrelated and product-like within
    // every proxy slice at n = 1e3, N = 1e5, R = 5000.
    let config = ExperimentConfig {
        model: ModelSpec::TwoColor {
            initial_black: 2.0,
            initial_red: 2.0,
            black: uniform123(),
            red: uniform123(),
            pairing: Default::default(),
            moment_exponent: 3.0,
        },
        replications: 5000,
        horizon: 100_000,
        checkpoints: CheckpointSpec::Explicit(vec![1000, 100_000]),
        stat_checkpoints: vec![1000],
        storage: StorageMode::Checkpoint,
        tracked_color: 0,
        master_seed: 4242,
        tests: vec![],
        output: None,
        dump_trajectories: 0,
        min_proxy_ratio: 10.0,
    };
    let ensemble = build_ensemble(&config.resolve().unwrap()).unwrap();
    let report = joint_product_test(&ensemble, 1000, 0, &SliceTestConfig::default()).unwrap();
    assert!(report.overall_pass, "{report:?}");
    assert!(report.slices.iter().all(|s| !s.skipped_degenerate));

    // Kernel draws from this ensemble reproduce the mean limit variance.
    let kernel = sample_kernel(
        &ensemble,
        Statistic::D,
        0,
        40_000,
        StreamKey::branch(4242, 0, 7),
    )
    .unwrap();
    let mean_v: f64 = (0..ensemble.len())
        .map(|r| ensemble.variance_entry(r, Statistic::D, 0))
        .sum::<f64>()
        / ensemble.len() as f64;
    let n = kernel.draws.len() as f64;
    let var = kernel.draws.iter().map(|d| d * d).sum::<f64>() / n;
    let se = (2.0 * mean_v * mean_v / n).sqrt();
    assert!(
        (var - mean_v).abs() < 3.0 * se + 0.01,
        "kernel variance {var} vs mean V {mean_v}"
    );
    assert_eq!(kernel.clamped, 0);
}
