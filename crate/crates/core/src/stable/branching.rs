//! Nested branching estimators of conditional laws.
//!
//! One prefix is simulated to time n and frozen; M independent continuations
//! run to the horizon, each yielding its own terminal proxy and hence a
//! branch value D_n = sqrt(n)(Z_n - Z_N). Averaging a bounded test function
//! over branches is a direct Monte Carlo of the conditional expectation of
//! f(D_n) given the prefix, compared against the Gaussian with variance
//! evaluated at the frozen Z_n.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TestError;
use crate::clt::evaluate_limit_variance_scalar;
use crate::numeric::{kahan_sum, mean_and_variance};
use crate::streams::{derive_stream, StreamKey};
use crate::urn::{simulate, SimOptions, TwoColorConfig, UrnEngine};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchSpec {
    /// Prefix length n at which the conditional law is probed.
    pub prefix_n: u64,
    /// Number of independent continuations.
    pub branches: usize,
    /// Horizon each continuation runs to (the branch's own Z proxy).
    pub horizon: u64,
    /// Frequencies for the characteristic-function family cos(t x), sin(t x).
    pub t_grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

fn mean_se(values: &[f64]) -> MeanSe {
    let (mean, var) = mean_and_variance(values);
    MeanSe {
        mean,
        se: (var / values.len() as f64).sqrt(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalLawEstimate {
    pub prefix_id: u64,
    /// The frozen predictive probability at the prefix end.
    pub z_n: f64,
    /// Limit variance evaluated at the frozen Z_n.
    pub v_at_z_n: f64,
    pub t_grid: Vec<f64>,
    pub cos_estimates: Vec<MeanSe>,
    pub sin_estimates: Vec<MeanSe>,
    /// Gaussian reference values exp(-t^2 V / 2) for the cosine family.
    pub gaussian_cos: Vec<f64>,
    pub branches: usize,
}

/// Branch-average estimate of the conditional law of D_n given one frozen
/// prefix, against the characteristic function of the Gaussian kernel.
pub fn nested_conditional_law(
    config: &TwoColorConfig,
    spec: &BranchSpec,
    master_seed: u64,
    prefix_id: u64,
) -> Result<ConditionalLawEstimate, TestError> {
    if spec.branches < 100 {
        return Err(TestError::Domain(format!(
            "need at least 100 branches, got {}",
            spec.branches
        )));
    }
    if spec.horizon <= spec.prefix_n {
        return Err(TestError::Domain(
            "branch horizon must exceed the prefix length".into(),
        ));
    }
    let prefix_cfg = TwoColorConfig {
        horizon: spec.prefix_n,
        checkpoints: vec![spec.prefix_n],
        ..config.clone()
    };
    let trajectory = simulate(&prefix_cfg, master_seed, prefix_id, &SimOptions::default())?;
    let z_n = trajectory.terminal_z[0];
    let v_at_z_n = evaluate_limit_variance_scalar(
        z_n,
        config.schedule.limit_mean(),
        config.schedule.limit_second_moment(0),
        config.schedule.limit_second_moment(1),
    )
    .map_err(|e| TestError::Domain(e.to_string()))?
    .v;

    let steps = spec.horizon - spec.prefix_n;
    let sqrt_n = (spec.prefix_n as f64).sqrt();
    let branch_values: Vec<f64> = (0..spec.branches as u64)
        .into_par_iter()
        .map(|branch_id| {
            let mut engine = UrnEngine::resume(&trajectory, config.schedule.clone());
            let mut stream = derive_stream(StreamKey::branch(master_seed, prefix_id, branch_id));
            let z_terminal = engine
                .run_on_single_stream(steps, 0, &mut stream)
                .expect("branch continuation stays finite");
            sqrt_n * (z_n - z_terminal)
        })
        .collect();

    let mut cos_estimates = Vec::with_capacity(spec.t_grid.len());
    let mut sin_estimates = Vec::with_capacity(spec.t_grid.len());
    let mut gaussian_cos = Vec::with_capacity(spec.t_grid.len());
    for &t in &spec.t_grid {
        let cos_vals: Vec<f64> = branch_values.iter().map(|&d| (t * d).cos()).collect();
        let sin_vals: Vec<f64> = branch_values.iter().map(|&d| (t * d).sin()).collect();
        cos_estimates.push(mean_se(&cos_vals));
        sin_estimates.push(mean_se(&sin_vals));
        gaussian_cos.push((-0.5 * t * t * v_at_z_n).exp());
    }
    Ok(ConditionalLawEstimate {
        prefix_id,
        z_n,
        v_at_z_n,
        t_grid: spec.t_grid.clone(),
        cos_estimates,
        sin_estimates,
        gaussian_cos,
        branches: spec.branches,
    })
}

/// Per-replication unbiased estimates of the squared one-step drift
/// (E(Z_{n+1}|G_n) - Z_n)^2, via the product of two independent half-branch
/// means. The product form removes the branch-variance bias that a plain
/// squared mean would carry, which matters because the drift is orders of
/// magnitude below the one-step noise.
pub fn one_step_drift_products(
    config: &TwoColorConfig,
    n: u64,
    branches: usize,
    master_seed: u64,
    replications: std::ops::Range<u64>,
) -> Result<Vec<f64>, TestError> {
    if branches < 2 || branches % 2 != 0 {
        return Err(TestError::Domain(
            "need an even branch count of at least 2".into(),
        ));
    }
    let prefix_cfg = TwoColorConfig {
        horizon: n,
        checkpoints: vec![n],
        ..config.clone()
    };
    let schedule = &config.schedule;
    replications
        .collect::<Vec<u64>>()
        .into_par_iter()
        .map(|rep| {
            let trajectory = simulate(&prefix_cfg, master_seed, rep, &SimOptions::default())?;
            let z_n = trajectory.terminal_z[0];
            let w = trajectory.terminal_weights[0];
            let s = trajectory.terminal_total;
            let mut pair = [0.0f64; 2];
            let half = branches / 2;
            let mut halves = [0.0f64; 2];
            for b in 0..branches {
                let mut stream =
                    derive_stream(StreamKey::branch(master_seed, rep, b as u64));
                let u = stream.next_f64();
                schedule.sample_step(n + 1, &mut stream, &mut pair);
                let z_next = if u < z_n {
                    (w + pair[0]) / (s + pair[0])
                } else {
                    w / (s + pair[1])
                };
                halves[(b >= half) as usize] += z_next;
            }
            let y1 = halves[0] / half as f64;
            let y2 = halves[1] / half as f64;
            Ok((y1 - z_n) * (y2 - z_n))
        })
        .collect()
}

/// Expected value of min(X^2, cap^2) under N(0, sigma^2); reference value
/// for the clipped-square test function.
pub fn gaussian_clipped_square(sigma2: f64, cap: f64) -> f64 {
    if sigma2 <= 0.0 {
        return 0.0;
    }
    let sigma = sigma2.sqrt();
    let kappa = cap / sigma;
    let phi = crate::numeric::normal_pdf(kappa);
    let tail = 1.0 - crate::numeric::normal_cdf(kappa);
    sigma2 * ((2.0 * crate::numeric::normal_cdf(kappa) - 1.0) - 2.0 * kappa * phi)
        + cap * cap * 2.0 * tail
}

/// Branch average of a clipped test function family applied to precomputed
/// branch values; kept separate so callers can evaluate arbitrary bounded
/// functions without rerunning continuations.
pub fn branch_average<F: Fn(f64) -> f64>(branch_values: &[f64], f: F) -> MeanSe {
    let values: Vec<f64> = branch_values.iter().map(|&d| f(d)).collect();
    let mean = kahan_sum(values.iter().copied()) / values.len() as f64;
    let var = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)))
        / (values.len() - 1).max(1) as f64;
    MeanSe {
        mean,
        se: (var / values.len() as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{Pairing, ReinforcementLaw, ReinforcementSchedule};
    use crate::urn::geometric_checkpoints;

    fn polya_config(horizon: u64) -> TwoColorConfig {
        TwoColorConfig {
            initial_black: 1.0,
            initial_red: 1.0,
            schedule: ReinforcementSchedule::homogeneous(
                2,
                ReinforcementLaw::constant(1.0).unwrap(),
                Pairing::Independent,
            ),
            horizon,
            checkpoints: geometric_checkpoints(horizon),
        }
    }

    #[test]
    fn branch_average_of_constant_is_exact() {
        let values = vec![0.3, -0.7, 1.2];
        let est = branch_average(&values, |_| 4.2);
        assert_eq!(est.mean, 4.2);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn branch_se_shrinks_like_inverse_sqrt_m() {
        let config = polya_config(20_000);
        let spec_small = BranchSpec {
            prefix_n: 200,
            branches: 400,
            horizon: 20_000,
            t_grid: vec![1.0],
        };
        let spec_large = BranchSpec {
            branches: 1600,
            ..spec_small.clone()
        };
        let small = nested_conditional_law(&config, &spec_small, 555, 0).unwrap();
        let large = nested_conditional_law(&config, &spec_large, 555, 0).unwrap();
        let ratio = small.cos_estimates[0].se / large.cos_estimates[0].se;
        // Quadrupling the branches should halve the standard error.
        assert!((ratio - 2.0).abs() < 0.45, "ratio {ratio}");
        // Same prefix, same frozen state.
        assert_eq!(small.z_n, large.z_n);
    }

    #[test]
    fn characteristic_function_matches_gaussian_kernel() {
        // Symmetric unit urn with constant reinforcement: the conditional law
        // of D_n is the Gaussian kernel with variance Z_n(1 - Z_n).
        let config = polya_config(50_000);
        let spec = BranchSpec {
            prefix_n: 500,
            branches: 1000,
            horizon: 50_000,
            t_grid: vec![0.5, 1.0, 2.0],
        };
        let mut hits = 0;
        let prefixes = 6u64;
        for prefix in 0..prefixes {
            let est = nested_conditional_law(&config, &spec, 556, prefix).unwrap();
            let ok = est
                .cos_estimates
                .iter()
                .zip(&est.gaussian_cos)
                .all(|(got, want)| (got.mean - want).abs() <= 3.0 * got.se.max(1e-4));
            hits += ok as u64;
        }
        assert!(hits >= prefixes - 1, "only {hits}/{prefixes} prefixes matched");
    }

    #[test]
    fn bounded_family_stays_bounded() {
        let config = polya_config(10_000);
        let spec = BranchSpec {
            prefix_n: 100,
            branches: 200,
            horizon: 10_000,
            t_grid: vec![0.5, 1.0, 2.0, 5.0],
        };
        let est = nested_conditional_law(&config, &spec, 557, 3).unwrap();
        for e in est.cos_estimates.iter().chain(&est.sin_estimates) {
            assert!(e.mean.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn branch_budget_is_enforced() {
        let config = polya_config(1000);
        let spec = BranchSpec {
            prefix_n: 10,
            branches: 50,
            horizon: 1000,
            t_grid: vec![1.0],
        };
        assert!(matches!(
            nested_conditional_law(&config, &spec, 1, 0),
            Err(TestError::Domain(_))
        ));
    }

    #[test]
    fn drift_products_vanish_for_exact_martingale() {
        // Constant equal reinforcement: the drift is exactly zero, so the
        // n^3-scaled statistic must sit at zero within its standard error.
        let config = polya_config(1000);
        let products = one_step_drift_products(&config, 300, 200, 558, 0..200).unwrap();
        let stat = crate::clt::condition_basic_stat(&products, 300, 100);
        assert!(!stat.widened);
        assert!(
            stat.scaled.abs() <= 4.0 * stat.standard_error,
            "scaled {} se {}",
            stat.scaled,
            stat.standard_error
        );
    }

    #[test]
    fn drift_bound_holds_pathwise_for_equal_means() {
        // |E(Z_{n+1}|G_n) - Z_n| <= (EB^2 + ER^2) / S_n^2 via the exact
        // one-step conditional mean.
        let config = TwoColorConfig {
            schedule: ReinforcementSchedule::homogeneous(
                2,
                ReinforcementLaw::discrete_uniform(&[1.0, 2.0, 3.0]).unwrap(),
                Pairing::Independent,
            ),
            ..polya_config(500)
        };
        for rep in 0..20 {
            let traj = simulate(&config, 559, rep, &SimOptions::default()).unwrap();
            let z_n = traj.terminal_z[0];
            let mean = crate::urn::one_step_conditional_mean(
                &traj.terminal_weights,
                traj.terminal_total,
                0,
                &config.schedule,
                config.horizon + 1,
            );
            let next = config.horizon + 1;
            let bound = (config.schedule.law_at(0, next).second_moment()
                + config.schedule.law_at(1, next).second_moment())
                / (traj.terminal_total * traj.terminal_total);
            assert!(
                (mean - z_n).abs() <= bound + 1e-15,
                "drift {} bound {bound}",
                (mean - z_n).abs()
            );
        }
    }

    #[test]
    fn unequal_means_blow_up_the_scaled_drift() {
        // Means 2.0 vs 2.2 (validation would reject this): the drift is
        // O(1/n) while proportions stay interior, so the n^3-scaled
        // statistic grows linearly in n instead of vanishing.
        let schedule = ReinforcementSchedule::new(
            vec![
                crate::laws::ColorSchedule::constant_law(ReinforcementLaw::constant(2.0).unwrap()),
                crate::laws::ColorSchedule::constant_law(ReinforcementLaw::constant(2.2).unwrap()),
            ],
            Pairing::Independent,
            3.0,
        );
        let mut products_small = Vec::new();
        let mut products_large = Vec::new();
        for (n, out) in [(50u64, &mut products_small), (400, &mut products_large)] {
            for rep in 0..100u64 {
                // Manual prefix walk because config validation would reject
                // this schedule.
                let mut engine = UrnEngine::new(vec![1.0, 1.0], schedule.clone(), 0);
                let mut draw = derive_stream(StreamKey::draw(560, rep));
                let mut reinf = derive_stream(StreamKey::reinforcement(560, rep));
                for _ in 0..n {
                    engine.step(&mut draw, &mut reinf).unwrap();
                }
                let z_n = engine.z(0);
                let exact = crate::urn::one_step_conditional_mean(
                    &engine.weights,
                    engine.total,
                    0,
                    &schedule,
                    n + 1,
                );
                let drift = exact - z_n;
                out.push(drift * drift);
            }
        }
        let small = crate::clt::condition_basic_stat(&products_small, 50, 50);
        let large = crate::clt::condition_basic_stat(&products_large, 400, 50);
        // n^3 E(drift^2) ~ n when means differ: the statistic grows ~8x
        // between n = 50 and n = 400.
        assert!(
            large.scaled > 4.0 * small.scaled,
            "{small:?} {large:?}"
        );
        assert!(large.scaled > 0.05, "{large:?}");
    }
}
