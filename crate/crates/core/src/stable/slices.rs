//! Conditional (slice) goodness-of-fit tests.
//!
//! Convergence to a Gaussian variance mixture is tested where it has
//! content: conditionally on the limit proportion. Replications are sliced
//! into equal-count quantile bins of the Z proxy, each replication's
//! statistic is studentized by the limit standard deviation evaluated at its
//! own proxy, and each slice is compared against the standard normal. A
//! pooled test would also pass for ensembles that merely mimic the mixture
//! marginally; the slice test does not.

use serde::{Deserialize, Serialize};

use super::ks::{kolmogorov_critical, ks_distance_sorted};
use super::{Ensemble, Statistic, TestError};
use crate::numeric::{normal_cdf, normal_quantile, pearson_r, quantile_sorted, sorted};
use crate::streams::{derive_stream, StreamKey};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SliceTestConfig {
    /// Target number of equal-count quantile bins of the Z proxy.
    pub slices: usize,
    /// Bins are merged down until every slice holds at least this many
    /// replications.
    pub min_slice_count: usize,
    /// Family-wise level across slices, split by Bonferroni. Calibrated by
    /// self-simulation (see the harness power tests) rather than taken from
    /// asymptotic theory alone.
    pub global_alpha: f64,
    /// Variance entries below this are treated as a degenerate kernel.
    pub degenerate_variance_floor: f64,
    /// Degenerate slices switch to a magnitude test: 95th percentile of the
    /// raw |statistic| must stay below this.
    pub degenerate_magnitude_threshold: f64,
    /// Scale constant for the joint independence distance threshold
    /// `c / sqrt(count)`; calibrated by self-simulation.
    pub joint_distance_constant: f64,
}

impl Default for SliceTestConfig {
    fn default() -> Self {
        Self {
            slices: 8,
            min_slice_count: 200,
            global_alpha: 0.002,
            degenerate_variance_floor: 1e-10,
            degenerate_magnitude_threshold: 0.1,
            joint_distance_constant: 2.0,
        }
    }
}

/// How a slice was tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceRoute {
    /// Studentized values against the standard normal.
    Ks,
    /// Degenerate kernel: raw magnitudes against a smallness threshold.
    Magnitude,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceReport {
    pub bin: usize,
    pub count: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub route: SliceRoute,
    /// KS distance for the KS route; 95th percentile of |statistic| for the
    /// magnitude route.
    pub ks: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceTestReport {
    pub name: String,
    pub n: u64,
    pub statistic: Statistic,
    pub color: usize,
    pub slices: Vec<SliceReport>,
    pub overall_pass: bool,
    pub max_ks: f64,
    /// Pooled KS over all studentizable replications, recorded for context.
    pub pooled_ks: f64,
    pub thresholds: ThresholdRecord,
    pub seeds: SeedRecord,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub global_alpha: f64,
    pub per_slice_alpha: f64,
    pub ks_critical: f64,
    pub degenerate_variance_floor: f64,
    pub degenerate_magnitude_threshold: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master_seed: u64,
}

/// Equal-count partition of replications ordered by their Z proxy.
fn slice_indices(ensemble: &Ensemble, color: usize, config: &SliceTestConfig) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..ensemble.len()).collect();
    order.sort_by(|&a, &b| {
        ensemble
            .proxy(a, color)
            .partial_cmp(&ensemble.proxy(b, color))
            .expect("NaN proxy")
    });
    let r = order.len();
    let slices = (r / config.min_slice_count).clamp(1, config.slices);
    (0..slices)
        .map(|i| order[i * r / slices..(i + 1) * r / slices].to_vec())
        .collect()
}

/// Per-slice KS test of the studentized statistic against the standard
/// normal, with degenerate slices routed to a magnitude test.
pub fn studentized_test(
    ensemble: &Ensemble,
    n: u64,
    statistic: Statistic,
    color: usize,
    config: &SliceTestConfig,
) -> Result<SliceTestReport, TestError> {
    let bins = slice_indices(ensemble, color, config);
    let per_slice_alpha = config.global_alpha / bins.len() as f64;
    let ks_critical = kolmogorov_critical(per_slice_alpha);
    let mut reports = Vec::with_capacity(bins.len());
    let mut pooled = Vec::with_capacity(ensemble.len());
    let mut max_ks = 0.0f64;
    let mut overall = true;
    for (bin, members) in bins.iter().enumerate() {
        let mut values = Vec::with_capacity(members.len());
        let mut entries = Vec::with_capacity(members.len());
        for &rep in members {
            values.push(ensemble.statistic_value(rep, n, statistic, color)?);
            entries.push(ensemble.variance_entry(rep, statistic, color));
        }
        let z_lo = ensemble.proxy(members[0], color);
        let z_hi = ensemble.proxy(*members.last().unwrap(), color);
        let min_entry = entries.iter().copied().fold(f64::INFINITY, f64::min);
        let (route, stat_value, threshold) = if min_entry < config.degenerate_variance_floor {
            let magnitudes = sorted(&values.iter().map(|v| v.abs()).collect::<Vec<_>>());
            let p95 = quantile_sorted(&magnitudes, 0.95);
            (
                SliceRoute::Magnitude,
                p95,
                config.degenerate_magnitude_threshold,
            )
        } else {
            let studentized: Vec<f64> = values
                .iter()
                .zip(&entries)
                .map(|(v, e)| v / e.sqrt())
                .collect();
            pooled.extend_from_slice(&studentized);
            let d = ks_distance_sorted(&sorted(&studentized), normal_cdf);
            max_ks = max_ks.max(d);
            (SliceRoute::Ks, d, ks_critical / (members.len() as f64).sqrt())
        };
        let pass = stat_value < threshold;
        overall &= pass;
        reports.push(SliceReport {
            bin,
            count: members.len(),
            z_lo,
            z_hi,
            route,
            ks: stat_value,
            threshold,
            pass,
        });
    }
    let pooled_ks = if pooled.is_empty() {
        0.0
    } else {
        ks_distance_sorted(&sorted(&pooled), normal_cdf)
    };
    Ok(SliceTestReport {
        name: format!("studentized_{}", statistic.label()),
        n,
        statistic,
        color,
        slices: reports,
        overall_pass: overall,
        max_ks,
        pooled_ks,
        thresholds: ThresholdRecord {
            global_alpha: config.global_alpha,
            per_slice_alpha,
            ks_critical,
            degenerate_variance_floor: config.degenerate_variance_floor,
            degenerate_magnitude_threshold: config.degenerate_magnitude_threshold,
        },
        seeds: SeedRecord {
            master_seed: ensemble.master_seed,
        },
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointSliceReport {
    pub bin: usize,
    pub count: usize,
    /// Pearson correlation of the studentized pair.
    pub r: f64,
    pub r_threshold: f64,
    /// Sup distance between the joint empirical CDF and the product of its
    /// marginals.
    pub d2: f64,
    pub d2_threshold: f64,
    pub pass: bool,
    /// Slices with a degenerate variance entry cannot be studentized and are
    /// excluded from the joint check.
    pub skipped_degenerate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointTestReport {
    pub name: String,
    pub n: u64,
    pub color: usize,
    pub slices: Vec<JointSliceReport>,
    pub overall_pass: bool,
    pub seeds: SeedRecord,
}

/// Sup distance between the joint empirical CDF of (x, y) and the product of
/// the marginal empirical CDFs, evaluated at the sample points.
fn independence_distance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let nf = n as f64;
    let mut sup = 0.0f64;
    for i in 0..n {
        let (xi, yi) = (xs[i], ys[i]);
        let mut joint = 0usize;
        let mut fx = 0usize;
        let mut fy = 0usize;
        for j in 0..n {
            let lx = xs[j] <= xi;
            let ly = ys[j] <= yi;
            joint += (lx && ly) as usize;
            fx += lx as usize;
            fy += ly as usize;
        }
        let gap = (joint as f64 / nf - (fx as f64 / nf) * (fy as f64 / nf)).abs();
        if gap > sup {
            sup = gap;
        }
    }
    sup
}

/// Within each proxy slice, checks that the studentized C and D are
/// uncorrelated and that their joint empirical law matches the product of
/// its marginals: the empirical content of the product-kernel limit.
pub fn joint_product_test(
    ensemble: &Ensemble,
    n: u64,
    color: usize,
    config: &SliceTestConfig,
) -> Result<JointTestReport, TestError> {
    let bins = slice_indices(ensemble, color, config);
    let per_slice_alpha = config.global_alpha / bins.len() as f64;
    let mut reports = Vec::with_capacity(bins.len());
    let mut overall = true;
    for (bin, members) in bins.iter().enumerate() {
        let mut c_vals = Vec::with_capacity(members.len());
        let mut d_vals = Vec::with_capacity(members.len());
        let mut degenerate = false;
        for &rep in members {
            let u = ensemble.variance_entry(rep, Statistic::C, color);
            let v = ensemble.variance_entry(rep, Statistic::D, color);
            if u < config.degenerate_variance_floor || v < config.degenerate_variance_floor {
                degenerate = true;
                break;
            }
            c_vals.push(ensemble.statistic_value(rep, n, Statistic::C, color)? / u.sqrt());
            d_vals.push(ensemble.statistic_value(rep, n, Statistic::D, color)? / v.sqrt());
        }
        if degenerate {
            reports.push(JointSliceReport {
                bin,
                count: members.len(),
                r: 0.0,
                r_threshold: 0.0,
                d2: 0.0,
                d2_threshold: 0.0,
                pass: true,
                skipped_degenerate: true,
            });
            continue;
        }
        let count = members.len() as f64;
        let r = pearson_r(&c_vals, &d_vals);
        let r_threshold = normal_quantile(1.0 - per_slice_alpha / 2.0) / (count - 1.0).sqrt();
        let d2 = independence_distance(&c_vals, &d_vals);
        let d2_threshold = config.joint_distance_constant / count.sqrt();
        let pass = r.abs() < r_threshold && d2 < d2_threshold;
        overall &= pass;
        reports.push(JointSliceReport {
            bin,
            count: members.len(),
            r,
            r_threshold,
            d2,
            d2_threshold,
            pass,
            skipped_degenerate: false,
        });
    }
    Ok(JointTestReport {
        name: "joint_product".into(),
        n,
        color,
        slices: reports,
        overall_pass: overall,
        seeds: SeedRecord {
            master_seed: ensemble.master_seed,
        },
    })
}

/// Studentized values grouped by proxy slice, for plot-data exports.
#[derive(Clone, Debug)]
pub struct StudentizedSlice {
    pub bin: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub values: Vec<f64>,
    pub degenerate: bool,
}

pub fn studentized_slices(
    ensemble: &Ensemble,
    n: u64,
    statistic: Statistic,
    color: usize,
    config: &SliceTestConfig,
) -> Result<Vec<StudentizedSlice>, TestError> {
    let bins = slice_indices(ensemble, color, config);
    let mut out = Vec::with_capacity(bins.len());
    for (bin, members) in bins.iter().enumerate() {
        let entries: Vec<f64> = members
            .iter()
            .map(|&rep| ensemble.variance_entry(rep, statistic, color))
            .collect();
        let degenerate = entries
            .iter()
            .any(|&e| e < config.degenerate_variance_floor);
        let mut values = Vec::with_capacity(members.len());
        for (&rep, &entry) in members.iter().zip(&entries) {
            let raw = ensemble.statistic_value(rep, n, statistic, color)?;
            values.push(if degenerate { raw } else { raw / entry.sqrt() });
        }
        out.push(StudentizedSlice {
            bin,
            z_lo: ensemble.proxy(members[0], color),
            z_hi: ensemble.proxy(*members.last().unwrap(), color),
            values,
            degenerate,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AtomlessnessReport {
    /// Largest fraction of proxies inside any window of the given width.
    pub max_window_mass: f64,
    pub window: f64,
    /// Left edge of the heaviest window.
    pub location: f64,
}

/// Largest cluster fraction of terminal proxies within a sliding window.
/// Diagnostic for atoms in the limit law; reported, not gated.
pub fn atomlessness_diag(proxies: &[f64], window: f64) -> AtomlessnessReport {
    assert!(!proxies.is_empty());
    let zs = sorted(proxies);
    let n = zs.len();
    let mut best = 0usize;
    let mut location = zs[0];
    let mut lo = 0usize;
    for hi in 0..n {
        while zs[hi] - zs[lo] > window {
            lo += 1;
        }
        if hi - lo + 1 > best {
            best = hi - lo + 1;
            location = zs[lo];
        }
    }
    AtomlessnessReport {
        max_window_mass: best as f64 / n as f64,
        window,
        location,
    }
}

#[derive(Clone, Debug)]
pub struct KernelSample {
    pub draws: Vec<f64>,
    /// Variance entries numerically below zero (within -1e-12) that were
    /// clamped to zero.
    pub clamped: usize,
}

/// Draws from the estimated mixture law: pick a replication's proxy
/// uniformly, then a Gaussian with that replication's variance entry.
pub fn sample_kernel(
    ensemble: &Ensemble,
    statistic: Statistic,
    color: usize,
    count: usize,
    key: StreamKey,
) -> Result<KernelSample, TestError> {
    let mut src = derive_stream(key);
    let mut draws = Vec::with_capacity(count);
    let mut clamped = 0usize;
    for _ in 0..count {
        let rep = (src.next_f64() * ensemble.len() as f64) as usize;
        let rep = rep.min(ensemble.len() - 1);
        let mut entry = ensemble.variance_entry(rep, statistic, color);
        if entry < 0.0 {
            if entry < -1e-12 {
                return Err(TestError::Domain(format!(
                    "variance entry {entry} below the clamping tolerance"
                )));
            }
            entry = 0.0;
            clamped += 1;
        }
        draws.push(src.next_gaussian() * entry.sqrt());
    }
    Ok(KernelSample { draws, clamped })
}
