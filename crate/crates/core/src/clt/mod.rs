//! Per-trajectory statistics: the scaled prediction errors
//!
//! ```text
//! C_n = sqrt(n) (Xbar_n - Z_n),   D_n = sqrt(n) (Z_n - Z),   W_n = C_n + D_n
//! ```
//!
//! where the unobservable limit Z is replaced by the terminal predictive
//! probability Z_N, together with limit-variance evaluators and the
//! convergence-rate diagnostics that need dense increment storage.

mod conditions;
mod variance;

pub use conditions::{
    cesaro_tail_average, condition_a_stat, condition_b_stat, condition_basic_stat,
    condition_c_stat, condition_d_stat, DriftStat, TailTruncation,
};
pub use variance::{
    evaluate_limit_variance_matrix, evaluate_limit_variance_scalar, LimitVariance,
    MatrixVariance, ScalarVariance,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("checkpoint n={n} too close to horizon {horizon}: need horizon >= {required:.0}")]
    ProxyTooClose { n: u64, horizon: u64, required: f64 },
    #[error("checkpoint n={0} not recorded in the trajectory")]
    MissingCheckpoint(u64),
    #[error("dense per-step storage required for this statistic")]
    DenseModeRequired,
    #[error("tail truncation too short: n={n}, horizon={horizon}, need horizon >= {required}")]
    TruncationTooShort { n: usize, horizon: usize, required: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
}

/// Full per-step path of one tracked color or target set.
/// `z[k]` is the predictive probability after step k (`z[0]` initial);
/// `x[k-1]` indicates whether step k drew the tracked color.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensePath {
    pub z: Vec<f64>,
    pub x: Vec<u8>,
}

impl DensePath {
    pub fn horizon(&self) -> usize {
        self.x.len()
    }

    /// Increment Z_{k-1} - Z_k for a 1-based step index.
    #[inline]
    pub fn backward_increment(&self, k: usize) -> f64 {
        self.z[k - 1] - self.z[k]
    }
}

/// Checkpointed view of a trajectory, shared by the urn and predictive-
/// sequence simulators.
#[derive(Clone, Debug)]
pub struct CheckpointView {
    pub n: u64,
    pub z: Vec<f64>,
    pub xbar: Vec<f64>,
    pub s: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrajectorySummary {
    pub checkpoints: Vec<CheckpointView>,
    pub terminal_z: Vec<f64>,
    pub horizon: u64,
}

impl TrajectorySummary {
    pub fn checkpoint(&self, n: u64) -> Option<&CheckpointView> {
        self.checkpoints.iter().find(|c| c.n == n)
    }
}

/// Policy for replacing the unobservable limit Z with the terminal
/// predictive probability. D_n carries a relative proxy bias of order
/// sqrt(n / N), so horizons shorter than `min_horizon_ratio * n` are
/// rejected.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ZProxyPolicy {
    pub min_horizon_ratio: f64,
}

impl Default for ZProxyPolicy {
    fn default() -> Self {
        Self {
            min_horizon_ratio: 10.0,
        }
    }
}

/// C, D and W at one checkpoint, one entry per color.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: u64,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CltSeries {
    pub points: Vec<SeriesPoint>,
    /// Terminal predictive probabilities used as the Z proxy.
    pub z_proxy: Vec<f64>,
    pub proxy_horizon: u64,
}

/// Computes C_n, D_n and W_n at the requested checkpoints.
///
/// Every requested n must be a recorded checkpoint and must satisfy the
/// proxy policy `n * min_horizon_ratio <= N`.
pub fn clt_series(
    summary: &TrajectorySummary,
    policy: &ZProxyPolicy,
    stat_checkpoints: &[u64],
) -> Result<CltSeries, StatsError> {
    let mut points = Vec::with_capacity(stat_checkpoints.len());
    for &n in stat_checkpoints {
        let required = n as f64 * policy.min_horizon_ratio;
        if (summary.horizon as f64) < required {
            return Err(StatsError::ProxyTooClose {
                n,
                horizon: summary.horizon,
                required,
            });
        }
        let view = summary
            .checkpoint(n)
            .ok_or(StatsError::MissingCheckpoint(n))?;
        let sqrt_n = (n as f64).sqrt();
        let c: Vec<f64> = view
            .xbar
            .iter()
            .zip(&view.z)
            .map(|(xbar, z)| sqrt_n * (xbar - z))
            .collect();
        let d: Vec<f64> = view
            .z
            .iter()
            .zip(&summary.terminal_z)
            .map(|(z, z_proxy)| sqrt_n * (z - z_proxy))
            .collect();
        let w: Vec<f64> = c.iter().zip(&d).map(|(c, d)| c + d).collect();
        points.push(SeriesPoint { n, c, d, w });
    }
    Ok(CltSeries {
        points,
        z_proxy: summary.terminal_z.clone(),
        proxy_horizon: summary.horizon,
    })
}

/// Squared derivative factor for r-step prediction statistics: with
/// f(x) = x^h (1-x)^(r-h), returns f'(z)^2. The r-step errors scale the
/// one-step ones by this factor. Boundary z uses the 0^0 = 1 convention;
/// a zero coefficient kills its term outright.
pub fn delta_step_sigma2(z: f64, h: u32, r: u32) -> Result<f64, StatsError> {
    if h > r {
        return Err(StatsError::Domain(format!("h = {h} exceeds r = {r}")));
    }
    if r < 1 {
        return Err(StatsError::Domain("r must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(StatsError::Domain(format!("z = {z} outside [0, 1]")));
    }
    let pow0 = |base: f64, exp: u32| -> f64 {
        if exp == 0 {
            1.0
        } else {
            base.powi(exp as i32)
        }
    };
    let term1 = if h == 0 {
        0.0
    } else {
        h as f64 * pow0(z, h - 1) * pow0(1.0 - z, r - h)
    };
    let term2 = if r == h {
        0.0
    } else {
        (r - h) as f64 * pow0(z, h) * pow0(1.0 - z, r - h - 1)
    };
    let derivative = term1 - term2;
    Ok(derivative * derivative)
}

/// n / S_n at each checkpoint, with the schedule's 1/m reference attached.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SOverNDiagnostic {
    pub points: Vec<(u64, f64)>,
    pub reference: f64,
}

pub fn s_over_n_diag(summary: &TrajectorySummary, limit_mean: f64) -> SOverNDiagnostic {
    SOverNDiagnostic {
        points: summary
            .checkpoints
            .iter()
            .filter_map(|c| c.s.map(|s| (c.n, c.n as f64 / s)))
            .collect(),
        reference: 1.0 / limit_mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary_with(points: Vec<(u64, f64, f64)>, terminal: f64, horizon: u64) -> TrajectorySummary {
        TrajectorySummary {
            checkpoints: points
                .into_iter()
                .map(|(n, z, xbar)| CheckpointView {
                    n,
                    z: vec![z],
                    xbar: vec![xbar],
                    s: None,
                })
                .collect(),
            terminal_z: vec![terminal],
            horizon,
        }
    }

    #[test]
    fn degenerate_path_gives_zero_statistics() {
        let summary = summary_with(vec![(4, 0.5, 0.5), (8, 0.5, 0.5)], 0.5, 100);
        let series = clt_series(&summary, &ZProxyPolicy::default(), &[4, 8]).unwrap();
        for point in &series.points {
            assert_eq!(point.c[0], 0.0);
            assert_eq!(point.d[0], 0.0);
            assert_eq!(point.w[0], 0.0);
        }
    }

    #[test]
    fn hand_computed_values() {
        let summary = summary_with(vec![(2, 0.6, 0.5)], 0.55, 100);
        let series = clt_series(&summary, &ZProxyPolicy::default(), &[2]).unwrap();
        let point = &series.points[0];
        assert!((point.c[0] - 2.0f64.sqrt() * (0.5 - 0.6)).abs() < 1e-15);
        assert!((point.c[0] + 0.14142135).abs() < 1e-7);
        assert!((point.d[0] - 2.0f64.sqrt() * 0.05).abs() < 1e-15);
        assert!((point.d[0] - 0.07071067).abs() < 1e-7);
        // W is materialized as C + D, exactly.
        assert_eq!(point.w[0], point.c[0] + point.d[0]);
    }

    #[test]
    fn proxy_policy_rejects_late_checkpoints() {
        let summary = summary_with(vec![(50, 0.5, 0.5)], 0.5, 100);
        let err = clt_series(&summary, &ZProxyPolicy::default(), &[50]).unwrap_err();
        assert!(matches!(err, StatsError::ProxyTooClose { n: 50, .. }));
    }

    #[test]
    fn missing_checkpoint_is_reported() {
        let summary = summary_with(vec![(4, 0.5, 0.5)], 0.5, 100);
        let err = clt_series(&summary, &ZProxyPolicy::default(), &[5]).unwrap_err();
        assert!(matches!(err, StatsError::MissingCheckpoint(5)));
    }

    #[test]
    fn delta_sigma2_values() {
        // h = r = 1: f is the identity, recovering the one-step errors.
        assert_eq!(delta_step_sigma2(0.3, 1, 1).unwrap(), 1.0);
        // Symmetric saddle of f(x) = x(1-x).
        assert_eq!(delta_step_sigma2(0.5, 1, 2).unwrap(), 0.0);
        // f(x) = x^2 (1-x), f'(0.5) = 2*0.25 - 0.25 = 0.25.
        assert!((delta_step_sigma2(0.5, 2, 3).unwrap() - 0.0625).abs() < 1e-15);
        // Boundary conventions.
        assert_eq!(delta_step_sigma2(0.0, 1, 1).unwrap(), 1.0);
        assert_eq!(delta_step_sigma2(0.0, 0, 2).unwrap(), 4.0);
        assert_eq!(delta_step_sigma2(1.0, 2, 2).unwrap(), 4.0);
        assert!(delta_step_sigma2(0.5, 3, 2).is_err());
        assert!(delta_step_sigma2(1.5, 1, 2).is_err());
    }

    #[test]
    fn s_over_n_constant_reinforcement() {
        // S_n = w_0 + n m exactly: at n = 1000, w_0 = 2, m = 3 the ratio is
        // 1000/3002.
        let summary = TrajectorySummary {
            checkpoints: vec![CheckpointView {
                n: 1000,
                z: vec![0.5],
                xbar: vec![0.5],
                s: Some(3002.0),
            }],
            terminal_z: vec![0.5],
            horizon: 1000,
        };
        let diag = s_over_n_diag(&summary, 3.0);
        assert_eq!(diag.points.len(), 1);
        assert!((diag.points[0].1 - 1000.0 / 3002.0).abs() < 1e-15);
        assert!((diag.points[0].1 - 0.33311).abs() < 1e-5);
        assert!((diag.reference - 1.0 / 3.0).abs() < 1e-15);
    }
}
