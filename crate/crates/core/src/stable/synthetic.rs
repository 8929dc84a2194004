//! Synthetic ensembles with known truth, used to calibrate the slice tests
//! and to demonstrate their power.

use super::{Ensemble, ReplicationSummary, SummaryPoint};
use crate::clt::{evaluate_limit_variance_scalar, LimitVariance, ScalarVariance};
use crate::streams::{derive_stream, StreamKey};

/// Ensemble drawn from the claimed limit: proxy Z uniform on (0.05, 0.95),
/// variance V = Z(1-Z), and D ~ N(0, V) conditionally. Every slice of a
/// sound harness must pass on this input.
pub fn synthetic_matched(replications: usize, master_seed: u64, n: u64) -> Ensemble {
    let summaries = (0..replications as u64)
        .map(|rep| {
            let mut src = derive_stream(StreamKey::draw(master_seed, rep));
            let z = 0.05 + 0.9 * src.next_f64();
            let variance = evaluate_limit_variance_scalar(z, 1.0, 1.0, 1.0)
                .expect("synthetic parameters are in-domain");
            let d = src.next_gaussian() * variance.v.sqrt();
            summary(rep, z, LimitVariance::Scalar(variance), n, d)
        })
        .collect();
    Ensemble::new(summaries, vec![n], 0, n * 100, master_seed, 1.0)
        .expect("synthetic ensemble is well-formed")
}

/// Non-stable ensemble: D ~ N(0, 1) independent of a two-point variance
/// attached to the proxy (0.25 below the median, 1.0 above). Marginally D is
/// standard normal, but conditionally on the low-variance slices the
/// studentized values spread like N(0, 4); a harness with power must fail
/// those slices.
pub fn synthetic_adversarial(replications: usize, master_seed: u64, n: u64) -> Ensemble {
    let summaries = (0..replications as u64)
        .map(|rep| {
            let mut src = derive_stream(StreamKey::draw(master_seed, rep));
            let z = src.next_f64();
            let v = if z < 0.5 { 0.25 } else { 1.0 };
            let d = src.next_gaussian();
            let variance = ScalarVariance {
                u: 0.0,
                v,
                z,
                m: 1.0,
                // Recorded inputs consistent with the attached V.
                q: v / (z * (1.0 - z)).max(1e-9),
                s: v / (z * (1.0 - z)).max(1e-9),
            };
            summary(rep, z, LimitVariance::Scalar(variance), n, d)
        })
        .collect();
    Ensemble::new(summaries, vec![n], 0, n * 100, master_seed, 1.0)
        .expect("synthetic ensemble is well-formed")
}

fn summary(
    replication_id: u64,
    z: f64,
    variance: LimitVariance,
    n: u64,
    d: f64,
) -> ReplicationSummary {
    ReplicationSummary {
        replication_id,
        z_proxy: vec![z],
        variance,
        points: vec![SummaryPoint {
            n,
            c: vec![0.0],
            d: vec![d],
            w: vec![d],
            a_stat: None,
            b_stat: None,
            c_stat: None,
            d_stat: None,
            d_stat_tail: None,
        }],
        n_over_s: Vec::new(),
    }
}
