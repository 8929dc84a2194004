//! Ensemble-level verification that the scaled errors converge to the
//! claimed Gaussian variance mixtures *conditionally*: within every slice of
//! the limit proportion, not just pooled. Pooled convergence in distribution
//! cannot distinguish a mixture from accidental marginal agreement; the
//! slice tests can, and the synthetic ensembles in [`synthetic`] demonstrate
//! both their soundness and their power.

mod branching;
mod ks;
mod slices;
mod synthetic;

pub use branching::{
    branch_average, gaussian_clipped_square, nested_conditional_law, one_step_drift_products,
    BranchSpec, ConditionalLawEstimate, MeanSe,
};
pub use ks::{ks_distance, ks_distance_sorted, ks_two_sample, kolmogorov_critical, kolmogorov_survival};
pub use slices::{
    atomlessness_diag, joint_product_test, sample_kernel, studentized_slices, studentized_test,
    AtomlessnessReport, JointSliceReport, JointTestReport, KernelSample, SliceReport, SliceRoute,
    SliceTestConfig, SliceTestReport, StudentizedSlice,
};
pub use synthetic::{synthetic_adversarial, synthetic_matched};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clt::LimitVariance;

#[derive(Debug, Error)]
pub enum TestError {
    #[error("ensemble needs at least {need} replications, got {got}")]
    TooFewReplications { got: usize, need: usize },
    #[error("replication {replication} lacks a statistic point at n={n}")]
    MissingPoint { replication: u64, n: u64 },
    #[error("replications disagree on the statistic checkpoint grid")]
    InconsistentGrid,
    #[error("{0}")]
    Domain(String),
    #[error("simulation failed: {0}")]
    Urn(#[from] crate::urn::UrnError),
}

/// Minimum ensemble size; below this the slice machinery is meaningless.
pub const MIN_REPLICATIONS: usize = 100;

/// Which scaled error a test runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    C,
    D,
    W,
}

impl Statistic {
    pub fn label(self) -> &'static str {
        match self {
            Statistic::C => "C",
            Statistic::D => "D",
            Statistic::W => "W",
        }
    }
}

/// One statistic checkpoint of one replication.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub n: u64,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub w: Vec<f64>,
    pub a_stat: Option<f64>,
    pub b_stat: Option<f64>,
    pub c_stat: Option<f64>,
    pub d_stat: Option<f64>,
    /// Tail-average estimator of the same limit as `d_stat`, kept for the
    /// two-estimator consistency check.
    pub d_stat_tail: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication_id: u64,
    /// Terminal predictive probabilities (the Z proxy), one per color.
    pub z_proxy: Vec<f64>,
    /// Limit variances evaluated at this replication's proxy.
    pub variance: LimitVariance,
    pub points: Vec<SummaryPoint>,
    /// (n, n / S_n) at trajectory checkpoints, when the model tracks total
    /// weight.
    pub n_over_s: Vec<(u64, f64)>,
}

/// A replication-indexed collection of statistic summaries sharing one
/// configuration and checkpoint grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ensemble {
    pub summaries: Vec<ReplicationSummary>,
    pub stat_ns: Vec<u64>,
    pub tracked_color: usize,
    pub horizon: u64,
    pub master_seed: u64,
    pub limit_mean: f64,
}

impl Ensemble {
    pub fn new(
        summaries: Vec<ReplicationSummary>,
        stat_ns: Vec<u64>,
        tracked_color: usize,
        horizon: u64,
        master_seed: u64,
        limit_mean: f64,
    ) -> Result<Self, TestError> {
        if summaries.len() < MIN_REPLICATIONS {
            return Err(TestError::TooFewReplications {
                got: summaries.len(),
                need: MIN_REPLICATIONS,
            });
        }
        for summary in &summaries {
            if summary.points.len() != stat_ns.len()
                || summary.points.iter().zip(&stat_ns).any(|(p, &n)| p.n != n)
            {
                return Err(TestError::InconsistentGrid);
            }
        }
        Ok(Self {
            summaries,
            stat_ns,
            tracked_color,
            horizon,
            master_seed,
            limit_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn point(&self, replication: usize, n: u64) -> Result<&SummaryPoint, TestError> {
        self.summaries[replication]
            .points
            .iter()
            .find(|p| p.n == n)
            .ok_or(TestError::MissingPoint {
                replication: self.summaries[replication].replication_id,
                n,
            })
    }

    /// Raw statistic value of one replication at checkpoint n for a color.
    pub fn statistic_value(
        &self,
        replication: usize,
        n: u64,
        statistic: Statistic,
        color: usize,
    ) -> Result<f64, TestError> {
        let point = self.point(replication, n)?;
        let series = match statistic {
            Statistic::C => &point.c,
            Statistic::D => &point.d,
            Statistic::W => &point.w,
        };
        Ok(series[color])
    }

    /// Variance entry matching a statistic (U for C, V for D, U+V for W).
    pub fn variance_entry(&self, replication: usize, statistic: Statistic, color: usize) -> f64 {
        let variance = &self.summaries[replication].variance;
        match statistic {
            Statistic::C => variance.u_entry(color),
            Statistic::D => variance.v_entry(color),
            Statistic::W => variance.w_entry(color),
        }
    }

    pub fn proxy(&self, replication: usize, color: usize) -> f64 {
        self.summaries[replication].z_proxy[color]
    }

    pub fn proxies(&self, color: usize) -> Vec<f64> {
        (0..self.len()).map(|r| self.proxy(r, color)).collect()
    }
}
