//! Convergence-rate diagnostics computed from dense increment storage.
//!
//! Each statistic is the pathwise, tail-truncated surrogate of one
//! hypothesis of the central limit theorem: (a) the scaled maximal
//! increment, (b) the empirical variance of the martingale array terms,
//! (c) the scaled tail supremum of increments, (d) the scaled tail sum of
//! squared increments, and the n^3-scaled drift statistic behind the
//! quasi-martingale condition. Ensemble aggregation happens at the caller.

use serde::{Deserialize, Serialize};

use super::{DensePath, StatsError};
use crate::numeric::KahanSum;

/// Tail truncation control for the (c) and (d) statistics. The neglected
/// tail is of order n/N relative, so a minimum horizon factor is enforced.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailTruncation {
    pub min_horizon_factor: usize,
}

impl Default for TailTruncation {
    fn default() -> Self {
        Self {
            min_horizon_factor: 10,
        }
    }
}

fn require_dense(path: &DensePath, n: usize) -> Result<(), StatsError> {
    if path.z.len() != path.x.len() + 1 {
        return Err(StatsError::DenseModeRequired);
    }
    if n < 1 || n > path.horizon() {
        return Err(StatsError::Domain(format!(
            "n = {n} outside the stored horizon {}",
            path.horizon()
        )));
    }
    Ok(())
}

/// n^{-1/2} max_{1<=k<=n} k |Z_{k-1} - Z_k|. The ensemble mean of this
/// statistic estimates the expectation whose decay is hypothesis (a).
pub fn condition_a_stat(path: &DensePath, n: usize) -> Result<f64, StatsError> {
    require_dense(path, n)?;
    let mut max = 0.0f64;
    for k in 1..=n {
        let v = k as f64 * path.backward_increment(k).abs();
        if v > max {
            max = v;
        }
    }
    Ok(max / (n as f64).sqrt())
}

/// (1/n) sum_{k=1}^n (X_k - Z_{k-1} + k (Z_{k-1} - Z_k))^2, the empirical
/// variance of the martingale array terms; converges to the limit variance
/// of the estimation error C_n.
pub fn condition_b_stat(path: &DensePath, n: usize) -> Result<f64, StatsError> {
    require_dense(path, n)?;
    let mut acc = KahanSum::new();
    for k in 1..=n {
        let term = path.x[k - 1] as f64 - path.z[k - 1] + k as f64 * path.backward_increment(k);
        acc.add(term * term);
    }
    Ok(acc.value() / n as f64)
}

/// sqrt(n) sup_{n<=k<=N} |Z_{k-1} - Z_k| (tail supremum, truncated at the
/// stored horizon).
pub fn condition_c_stat(
    path: &DensePath,
    n: usize,
    truncation: &TailTruncation,
) -> Result<f64, StatsError> {
    require_dense(path, n)?;
    let horizon = path.horizon();
    if horizon < truncation.min_horizon_factor * n {
        return Err(StatsError::TruncationTooShort {
            n,
            horizon,
            required: truncation.min_horizon_factor * n,
        });
    }
    let mut sup = 0.0f64;
    for k in n..=horizon {
        let v = path.backward_increment(k).abs();
        if v > sup {
            sup = v;
        }
    }
    Ok((n as f64).sqrt() * sup)
}

/// n sum_{n<=k<=N} (Z_{k-1} - Z_k)^2 (tail sum of squared increments,
/// truncated at the stored horizon); converges to the limit variance of the
/// predictive error D_n.
pub fn condition_d_stat(
    path: &DensePath,
    n: usize,
    truncation: &TailTruncation,
) -> Result<f64, StatsError> {
    require_dense(path, n)?;
    let horizon = path.horizon();
    if horizon < truncation.min_horizon_factor * n {
        return Err(StatsError::TruncationTooShort {
            n,
            horizon,
            required: truncation.min_horizon_factor * n,
        });
    }
    let mut acc = KahanSum::new();
    for k in n..=horizon {
        let dz = path.backward_increment(k);
        acc.add(dz * dz);
    }
    Ok(n as f64 * acc.value())
}

/// Tail and Cesaro averages of a series Y_1..Y_N:
/// `(n sum_{k=n}^N Y_k / k^2, (1/n) sum_{k=1}^n Y_k)`.
/// Both converge to the same limit when the conditional means of Y settle.
pub fn cesaro_tail_average(series: &[f64], n: usize) -> (f64, f64) {
    assert!(n >= 1 && n <= series.len(), "n out of range");
    let mut tail = KahanSum::new();
    for k in n..=series.len() {
        tail.add(series[k - 1] / (k as f64 * k as f64));
    }
    let mut head = KahanSum::new();
    for value in &series[..n] {
        head.add(*value);
    }
    (n as f64 * tail.value(), head.value() / n as f64)
}

/// Monte Carlo estimate of n^3 E{(E(Z_{n+1}|G_n) - Z_n)^2} from
/// per-replication unbiased products of two independent half-branch means
/// (each product estimates the squared one-step drift without the
/// branch-variance bias a plain square would carry).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DriftStat {
    pub n: u64,
    /// n^3-scaled mean of the drift-squared estimates.
    pub scaled: f64,
    /// n^3-scaled standard error over replications.
    pub standard_error: f64,
    pub replications: usize,
    /// Set when fewer replications than requested were available; the
    /// estimate stands but its interval is wide.
    pub widened: bool,
}

pub fn condition_basic_stat(products: &[f64], n: u64, min_replications: usize) -> DriftStat {
    let reps = products.len();
    let scale = (n as f64).powi(3);
    let mean = crate::numeric::kahan_sum(products.iter().copied()) / reps.max(1) as f64;
    let variance = if reps > 1 {
        crate::numeric::kahan_sum(products.iter().map(|p| (p - mean) * (p - mean)))
            / (reps - 1) as f64
    } else {
        0.0
    };
    DriftStat {
        n,
        scaled: scale * mean,
        standard_error: scale * (variance / reps.max(1) as f64).sqrt(),
        replications: reps,
        widened: reps < min_replications,
    }
}
