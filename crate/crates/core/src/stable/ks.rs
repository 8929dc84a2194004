//! Kolmogorov-Smirnov distances and asymptotic critical values.

use crate::numeric::sorted;

/// One-sample KS distance of a sorted sample against a continuous reference
/// CDF: the supremum over the jump corners of the empirical CDF.
pub fn ks_distance_sorted<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    assert!(!sample.is_empty(), "KS distance of an empty sample");
    let n = sample.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max(((i + 1) as f64 / n - f).abs());
        sup = sup.max((f - i as f64 / n).abs());
    }
    sup
}

/// One-sample KS distance; sorts a copy of the sample.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    ks_distance_sorted(&sorted(sample), cdf)
}

/// Two-sample KS distance: supremum gap between the two empirical CDFs over
/// the pooled values. Identical samples give exactly zero.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty());
    let xs = sorted(xs);
    let ys = sorted(ys);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        let gap = (i as f64 / xs.len() as f64 - j as f64 / ys.len() as f64).abs();
        if gap > sup {
            sup = gap;
        }
    }
    sup
}

/// Asymptotic Kolmogorov survival function
/// Q(c) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 c^2).
pub fn kolmogorov_survival(c: f64) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * c * c).exp();
        if term < 1e-18 {
            break;
        }
        sum += if j % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Critical value c(alpha) with Q(c) = alpha; the per-sample threshold is
/// c(alpha) / sqrt(n).
pub fn kolmogorov_critical(alpha: f64) -> f64 {
    assert!((0.0..1.0).contains(&alpha) && alpha > 0.0);
    let (mut lo, mut hi) = (0.2, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::normal_cdf;
    use crate::streams::{derive_stream, StreamKey};

    #[test]
    fn singleton_sample_against_normal() {
        // Empirical CDF jumps 0 -> 1 at 0 while the reference is 0.5 there.
        let d = ks_distance(&[0.0], normal_cdf);
        assert!((d - 0.5).abs() < 1e-7);
    }

    #[test]
    fn sample_against_itself_is_zero() {
        let xs = vec![3.0, -1.0, 2.0, 2.0, 0.5];
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
    }

    #[test]
    fn two_sample_hand_value() {
        let xs = vec![1.0, 1.0, 4.0, 4.0];
        let ys = vec![1.0, 1.0, 1.0, 4.0];
        assert!((ks_two_sample(&xs, &ys) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn critical_values_match_published_table() {
        assert!((kolmogorov_critical(0.01) - 1.628).abs() < 0.01);
        assert!((kolmogorov_critical(0.05) - 1.358).abs() < 0.01);
        assert!((kolmogorov_survival(1.63) - 0.01).abs() < 0.002);
    }

    #[test]
    fn gaussian_sample_stays_under_one_percent_threshold() {
        // 1e4 draws from the reference: distance below 1.63/sqrt(n) with 99%
        // probability; the fixed seed makes this deterministic.
        let mut src = derive_stream(StreamKey::draw(1701, 0));
        let sample: Vec<f64> = (0..10_000).map(|_| src.next_gaussian()).collect();
        let d = ks_distance(&sample, normal_cdf);
        assert!(d < 1.63 / 100.0, "d = {d}");
    }

    #[test]
    fn shifted_sample_is_detected() {
        let mut src = derive_stream(StreamKey::draw(1702, 0));
        let sample: Vec<f64> = (0..10_000).map(|_| src.next_gaussian() + 0.1).collect();
        let d = ks_distance(&sample, normal_cdf);
        assert!(d > 1.63 / 100.0, "d = {d}");
    }
}
