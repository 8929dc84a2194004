//! Parallel experiment execution.
//!
//! Replications are a work queue over replication indices; workers are pure
//! functions of (config, master_seed, replication_id), and results are
//! collected in replication order regardless of completion order, so the
//! ensemble is identical at any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use urnlab_core::clt::{
    cesaro_tail_average, clt_series, condition_a_stat, condition_b_stat, condition_c_stat,
    condition_d_stat, evaluate_limit_variance_matrix, evaluate_limit_variance_scalar,
    LimitVariance, TailTruncation,
};
use urnlab_core::numeric::{quantile_sorted, sorted};
use urnlab_core::pd::pd_simulate;
use urnlab_core::stable::{
    atomlessness_diag, joint_product_test, studentized_test, AtomlessnessReport, Ensemble,
    JointTestReport, ReplicationSummary, SliceTestConfig, SliceTestReport, SummaryPoint,
};
use urnlab_core::urn::{simulate, simulate_multicolor};

use crate::config::{ResolvedExperiment, ResolvedModel, TestSpec};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("simulation failed: {0}")]
    Urn(#[from] urnlab_core::urn::UrnError),
    #[error("simulation failed: {0}")]
    Pd(#[from] urnlab_core::pd::PdError),
    #[error("statistics failed: {0}")]
    Stats(#[from] urnlab_core::clt::StatsError),
    #[error("test failed to run: {0}")]
    Test(#[from] urnlab_core::stable::TestError),
    #[error("{0}")]
    Other(String),
}

/// One verification outcome, JSON-serializable for the run report.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestReport {
    Studentized(SliceTestReport),
    JointProduct(JointTestReport),
    Atomlessness {
        report: AtomlessnessReport,
        flagged: bool,
        pass: bool,
    },
    SOverN {
        n: u64,
        max_relative_error: f64,
        tolerance: f64,
        pass: bool,
    },
    DStatVsV {
        n: u64,
        median_ratio: f64,
        tolerance: f64,
        pass: bool,
    },
    BStatVsU {
        n: u64,
        median_ratio: f64,
        tolerance: f64,
        pass: bool,
    },
}

impl TestReport {
    pub fn name(&self) -> String {
        match self {
            TestReport::Studentized(r) => format!("{}_n{}", r.name, r.n),
            TestReport::JointProduct(r) => format!("{}_n{}", r.name, r.n),
            TestReport::Atomlessness { .. } => "atomlessness".into(),
            TestReport::SOverN { n, .. } => format!("s_over_n_n{n}"),
            TestReport::DStatVsV { n, .. } => format!("d_stat_vs_v_n{n}"),
            TestReport::BStatVsU { n, .. } => format!("b_stat_vs_u_n{n}"),
        }
    }

    pub fn pass(&self) -> bool {
        match self {
            TestReport::Studentized(r) => r.overall_pass,
            TestReport::JointProduct(r) => r.overall_pass,
            TestReport::Atomlessness { pass, .. } => *pass,
            TestReport::SOverN { pass, .. } => *pass,
            TestReport::DStatVsV { pass, .. } => *pass,
            TestReport::BStatVsU { pass, .. } => *pass,
        }
    }
}

fn replication_summary(
    rx: &ResolvedExperiment,
    replication_id: u64,
) -> Result<ReplicationSummary, RunError> {
    let truncation = TailTruncation::default();
    let (summary, dense, n_over_s) = match &rx.model {
        ResolvedModel::TwoColor(config) => {
            let traj = simulate(config, rx.master_seed, replication_id, &rx.options)?;
            let s = traj.summary();
            let n_over_s = s
                .checkpoints
                .iter()
                .filter_map(|c| c.s.map(|s| (c.n, c.n as f64 / s)))
                .collect();
            (s, traj.dense, n_over_s)
        }
        ResolvedModel::Multicolor(config) => {
            let traj = simulate_multicolor(config, rx.master_seed, replication_id, &rx.options)?;
            let s = traj.summary();
            let n_over_s = s
                .checkpoints
                .iter()
                .filter_map(|c| c.s.map(|s| (c.n, c.n as f64 / s)))
                .collect();
            (s, traj.dense, n_over_s)
        }
        ResolvedModel::PoissonDirichlet(config) => {
            let traj = pd_simulate(config, rx.master_seed, replication_id, &rx.options)?;
            (traj.summary(), traj.dense, Vec::new())
        }
    };

    let series = clt_series(&summary, &rx.policy, &rx.stat_ns)?;
    let variance = match &rx.model {
        ResolvedModel::TwoColor(config) => {
            let z = summary.terminal_z[rx.options.tracked_color];
            LimitVariance::Scalar(evaluate_limit_variance_scalar(
                z,
                config.schedule.limit_mean(),
                config.schedule.limit_second_moment(0),
                config.schedule.limit_second_moment(1),
            )?)
        }
        ResolvedModel::Multicolor(config) => {
            let q: Vec<f64> = (0..config.initial_weights.len())
                .map(|j| config.schedule.limit_second_moment(j))
                .collect();
            LimitVariance::Matrix(evaluate_limit_variance_matrix(
                &summary.terminal_z,
                config.schedule.limit_mean(),
                &q,
            )?)
        }
        ResolvedModel::PoissonDirichlet(_) => {
            // The predictive-sequence kernel is N(0, Z(1-Z)): the scalar
            // formula at m = q = s = 1.
            let z = summary.terminal_z[0];
            LimitVariance::Scalar(evaluate_limit_variance_scalar(z, 1.0, 1.0, 1.0)?)
        }
    };

    let mut points = Vec::with_capacity(series.points.len());
    for point in &series.points {
        let (mut a, mut b, mut c, mut d, mut d_tail) = (None, None, None, None, None);
        if let Some(path) = &dense {
            let n = point.n as usize;
            a = Some(condition_a_stat(path, n)?);
            b = Some(condition_b_stat(path, n)?);
            c = Some(condition_c_stat(path, n, &truncation)?);
            d = Some(condition_d_stat(path, n, &truncation)?);
            // Second estimator of the same tail limit, through the generic
            // tail averager applied to Y_k = k^2 (Z_{k-1} - Z_k)^2.
            let series_y: Vec<f64> = (1..=path.horizon())
                .map(|k| {
                    let dz = path.backward_increment(k);
                    (k as f64 * k as f64) * dz * dz
                })
                .collect();
            d_tail = Some(cesaro_tail_average(&series_y, n).0);
        }
        points.push(SummaryPoint {
            n: point.n,
            c: point.c.clone(),
            d: point.d.clone(),
            w: point.w.clone(),
            a_stat: a,
            b_stat: b,
            c_stat: c,
            d_stat: d,
            d_stat_tail: d_tail,
        });
    }

    Ok(ReplicationSummary {
        replication_id,
        z_proxy: summary.terminal_z.clone(),
        variance,
        points,
        n_over_s,
    })
}

/// Simulates all replications (in parallel when a pool is active) and
/// assembles the ensemble in replication order.
pub fn build_ensemble(rx: &ResolvedExperiment) -> Result<Ensemble, RunError> {
    let summaries: Vec<ReplicationSummary> = (0..rx.replications)
        .into_par_iter()
        .map(|rep| replication_summary(rx, rep))
        .collect::<Result<Vec<_>, _>>()?;
    Ensemble::new(
        summaries,
        rx.stat_ns.clone(),
        rx.options.tracked_color,
        rx.model.horizon(),
        rx.master_seed,
        rx.model.limit_mean(),
    )
    .map_err(RunError::Test)
}

fn median_ratio(
    ensemble: &Ensemble,
    n: u64,
    value: impl Fn(&SummaryPoint) -> Option<f64>,
    entry: impl Fn(usize) -> f64,
) -> Result<f64, RunError> {
    let mut ratios = Vec::with_capacity(ensemble.len());
    for (rep, summary) in ensemble.summaries.iter().enumerate() {
        let point = summary
            .points
            .iter()
            .find(|p| p.n == n)
            .ok_or_else(|| RunError::Other(format!("no statistic point at n={n}")))?;
        let numerator = value(point).ok_or_else(|| {
            RunError::Other(format!(
                "condition diagnostics missing at n={n}; run with dense storage"
            ))
        })?;
        let denominator = entry(rep);
        if denominator <= 0.0 {
            return Err(RunError::Other(format!(
                "nonpositive variance entry {denominator} at replication {rep}"
            )));
        }
        ratios.push(numerator / denominator);
    }
    Ok(quantile_sorted(&sorted(&ratios), 0.5))
}

/// Runs the configured verification tests against an ensemble.
pub fn run_tests(
    rx: &ResolvedExperiment,
    ensemble: &Ensemble,
    slice_config: &SliceTestConfig,
) -> Result<Vec<TestReport>, RunError> {
    let mut reports = Vec::with_capacity(rx.tests.len());
    for test in &rx.tests {
        let report = match test {
            TestSpec::Studentized { statistic, n, color } => TestReport::Studentized(
                studentized_test(ensemble, *n, *statistic, *color, slice_config)?,
            ),
            TestSpec::JointProduct { n, color } => {
                TestReport::JointProduct(joint_product_test(ensemble, *n, *color, slice_config)?)
            }
            TestSpec::Atomlessness { window } => {
                let report = atomlessness_diag(&ensemble.proxies(rx.options.tracked_color), *window);
                TestReport::Atomlessness {
                    flagged: report.max_window_mass > 0.05,
                    pass: true,
                    report,
                }
            }
            TestSpec::SOverN { n, tolerance } => {
                let m = ensemble.limit_mean;
                let mut max_err: f64 = 0.0;
                for summary in &ensemble.summaries {
                    let value = summary
                        .n_over_s
                        .iter()
                        .find(|(k, _)| k == n)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| {
                            RunError::Other(format!("no n/S_n checkpoint at n={n}"))
                        })?;
                    max_err = max_err.max((value * m - 1.0).abs());
                }
                TestReport::SOverN {
                    n: *n,
                    max_relative_error: max_err,
                    tolerance: *tolerance,
                    pass: max_err < *tolerance,
                }
            }
            TestSpec::DStatVsV { n, tolerance } => {
                let ratio = median_ratio(
                    ensemble,
                    *n,
                    |p| p.d_stat,
                    |rep| ensemble.variance_entry(rep, urnlab_core::stable::Statistic::D, rx.options.tracked_color),
                )?;
                TestReport::DStatVsV {
                    n: *n,
                    median_ratio: ratio,
                    tolerance: *tolerance,
                    pass: (ratio - 1.0).abs() < *tolerance,
                }
            }
            TestSpec::BStatVsU { n, tolerance } => {
                let ratio = median_ratio(
                    ensemble,
                    *n,
                    |p| p.b_stat,
                    |rep| ensemble.variance_entry(rep, urnlab_core::stable::Statistic::C, rx.options.tracked_color),
                )?;
                TestReport::BStatVsU {
                    n: *n,
                    median_ratio: ratio,
                    tolerance: *tolerance,
                    pass: (ratio - 1.0).abs() < *tolerance,
                }
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Builds a rayon pool with the requested thread count and runs `f` inside
/// it; `None` uses all cores.
pub fn with_thread_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}
