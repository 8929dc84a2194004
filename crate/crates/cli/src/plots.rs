//! Plot-ready CSV exports: histograms of the studentized statistics per
//! proxy slice with normal quantile overlays, the tail-variance statistic
//! against its limit, and the total-weight diagnostic. Data only, no
//! rendering.

use urnlab_core::numeric::{normal_quantile, quantile_sorted, sorted};
use urnlab_core::stable::{studentized_slices, Ensemble, SliceTestConfig, Statistic};

use crate::runner::RunError;

const HISTOGRAM_BINS: usize = 24;
const QUANTILE_LEVELS: usize = 99;

/// Histogram of the studentized statistic per slice. Bin edges span each
/// slice's own range, so masses sum to exactly one per slice.
pub fn histogram_csv(
    ensemble: &Ensemble,
    n: u64,
    statistic: Statistic,
    color: usize,
    config: &SliceTestConfig,
) -> Result<String, RunError> {
    let slices = studentized_slices(ensemble, n, statistic, color, config)?;
    let mut out = String::from("slice,bin_low,bin_high,mass\n");
    for slice in &slices {
        let lo = slice.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = slice.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = ((hi - lo) / HISTOGRAM_BINS as f64).max(f64::MIN_POSITIVE);
        let mut counts = [0u64; HISTOGRAM_BINS];
        for &v in &slice.values {
            let bin = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        let total = slice.values.len() as f64;
        for (b, &count) in counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                slice.bin,
                lo + b as f64 * width,
                lo + (b + 1) as f64 * width,
                count as f64 / total
            ));
        }
    }
    Ok(out)
}

/// Empirical vs standard-normal quantiles of the studentized statistic per
/// slice; monotone in the level column by construction.
pub fn quantile_csv(
    ensemble: &Ensemble,
    n: u64,
    statistic: Statistic,
    color: usize,
    config: &SliceTestConfig,
) -> Result<String, RunError> {
    let slices = studentized_slices(ensemble, n, statistic, color, config)?;
    let mut out = String::from("slice,level,empirical,normal\n");
    for slice in &slices {
        let values = sorted(&slice.values);
        for i in 1..=QUANTILE_LEVELS {
            let level = i as f64 / (QUANTILE_LEVELS + 1) as f64;
            out.push_str(&format!(
                "{},{},{},{}\n",
                slice.bin,
                level,
                quantile_sorted(&values, level),
                normal_quantile(level)
            ));
        }
    }
    Ok(out)
}

/// Tail-variance statistic against the limit variance at each replication's
/// proxy.
pub fn dstat_vs_v_csv(ensemble: &Ensemble, color: usize) -> String {
    let mut out = String::from("replication_id,n,d_stat,v,ratio\n");
    for (rep, summary) in ensemble.summaries.iter().enumerate() {
        let v = ensemble.variance_entry(rep, Statistic::D, color);
        for point in &summary.points {
            if let Some(d_stat) = point.d_stat {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    summary.replication_id,
                    point.n,
                    d_stat,
                    v,
                    d_stat / v
                ));
            }
        }
    }
    out
}

/// n / S_n against the 1/m reference.
pub fn n_over_s_csv(ensemble: &Ensemble) -> String {
    let reference = 1.0 / ensemble.limit_mean;
    let mut out = String::from("replication_id,n,n_over_s,reference\n");
    for summary in &ensemble.summaries {
        for (n, value) in &summary.n_over_s {
            out.push_str(&format!(
                "{},{},{},{}\n",
                summary.replication_id, n, value, reference
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use urnlab_core::stable::synthetic_matched;

    #[test]
    fn histogram_mass_sums_to_one_per_slice() {
        let ensemble = synthetic_matched(800, 77, 500);
        let csv = histogram_csv(&ensemble, 500, Statistic::D, 0, &SliceTestConfig::default())
            .unwrap();
        let mut masses = std::collections::BTreeMap::new();
        for line in csv.lines().skip(1) {
            let mut parts = line.split(',');
            let slice: usize = parts.next().unwrap().parse().unwrap();
            let mass: f64 = parts.nth(2).unwrap().parse().unwrap();
            *masses.entry(slice).or_insert(0.0) += mass;
        }
        assert_eq!(masses.len(), 4); // 800 / 200
        for (slice, mass) in masses {
            assert!((mass - 1.0f64).abs() < 1e-9, "slice {slice} mass {mass}");
        }
    }

    #[test]
    fn quantile_columns_are_monotone() {
        let ensemble = synthetic_matched(800, 78, 500);
        let csv =
            quantile_csv(&ensemble, 500, Statistic::D, 0, &SliceTestConfig::default()).unwrap();
        let mut last: Option<(usize, f64, f64, f64)> = None;
        for line in csv.lines().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            let row = (
                parts[0].parse::<usize>().unwrap(),
                parts[1].parse::<f64>().unwrap(),
                parts[2].parse::<f64>().unwrap(),
                parts[3].parse::<f64>().unwrap(),
            );
            if let Some(prev) = last {
                if prev.0 == row.0 {
                    assert!(row.1 > prev.1);
                    assert!(row.2 >= prev.2, "empirical quantiles non-monotone");
                    assert!(row.3 >= prev.3, "normal quantiles non-monotone");
                }
            }
            last = Some(row);
        }
    }
}
