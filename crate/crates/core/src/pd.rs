//! Predictive sequences on a finite alphabet with discounted occupancy
//! counts: the probability that the next symbol lands in a set A given the
//! first n symbols is
//!
//! ```text
//! [ sum_{y in A} (S_{n,y} - alpha) 1{S_{n,y} > 0}
//!   + (theta + alpha * #distinct) nu(A) ] / (theta + n)
//! ```
//!
//! with 0 <= alpha < 1, theta > -alpha, and nu the law of the first symbol.
//! For alpha = 0 this is a classical Dirichlet (exchangeable) sequence; for
//! alpha != 0 it need not be exchangeable, which is exactly why the
//! conditional-law test machinery is interesting on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clt::{CheckpointView, DensePath, TrajectorySummary};
use crate::streams::{derive_stream, StreamKey};
use crate::urn::{SimOptions, StorageMode};

#[derive(Debug, Error)]
pub enum PdError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("occupancy counts sum to {got}, expected n = {expected}")]
    InconsistentCounts { got: u64, expected: u64 },
    #[error("pathwise bound violated at n={n}: |C_n| = {c_abs} > {bound}")]
    BoundViolated { n: u64, c_abs: f64, bound: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdConfig {
    pub alpha: f64,
    pub theta: f64,
    /// Law of the first symbol; its length is the alphabet size.
    pub base_measure: Vec<f64>,
    /// Target set A as symbol indices.
    pub target: Vec<usize>,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
}

impl PdConfig {
    pub fn alphabet_size(&self) -> usize {
        self.base_measure.len()
    }

    pub fn nu_of_target(&self) -> f64 {
        self.target.iter().map(|&y| self.base_measure[y]).sum()
    }

    pub fn validate(&self) -> Result<(), PdError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(PdError::InvalidConfig(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.theta > -self.alpha) {
            return Err(PdError::InvalidConfig(format!(
                "theta must exceed -alpha, got theta={} alpha={}",
                self.theta, self.alpha
            )));
        }
        if self.base_measure.len() < 2 {
            return Err(PdError::InvalidConfig(
                "alphabet needs at least 2 symbols".into(),
            ));
        }
        if self.base_measure.iter().any(|&p| p < 0.0) {
            return Err(PdError::InvalidConfig(
                "base measure entries must be nonnegative".into(),
            ));
        }
        let total: f64 = self.base_measure.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PdError::InvalidConfig(format!(
                "base measure must sum to 1, sums to {total}"
            )));
        }
        if self.target.is_empty() {
            return Err(PdError::InvalidConfig("target set must be nonempty".into()));
        }
        let mut seen = vec![false; self.base_measure.len()];
        for &y in &self.target {
            if y >= self.base_measure.len() {
                return Err(PdError::InvalidConfig(format!(
                    "target symbol {y} outside alphabet of size {}",
                    self.base_measure.len()
                )));
            }
            if seen[y] {
                return Err(PdError::InvalidConfig(format!(
                    "target symbol {y} repeated"
                )));
            }
            seen[y] = true;
        }
        if self.horizon < 1 {
            return Err(PdError::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.checkpoints.is_empty()
            || !self.checkpoints.windows(2).all(|w| w[0] < w[1])
            || self.checkpoints[0] < 1
            || *self.checkpoints.last().unwrap() > self.horizon
        {
            return Err(PdError::InvalidConfig(
                "checkpoints must be nonempty, strictly increasing and within [1, horizon]".into(),
            ));
        }
        Ok(())
    }
}

/// Predictive probability of the set `target` after `n` observations with
/// the given occupancy counts.
pub fn pd_predictive(
    counts: &[u64],
    n: u64,
    config: &PdConfig,
    target: &[usize],
) -> Result<f64, PdError> {
    let got: u64 = counts.iter().sum();
    if got != n {
        return Err(PdError::InconsistentCounts { got, expected: n });
    }
    let distinct = counts.iter().filter(|&&c| c > 0).count() as f64;
    let nu_a: f64 = target.iter().map(|&y| config.base_measure[y]).sum();
    let mut numerator = (config.theta + config.alpha * distinct) * nu_a;
    for &y in target {
        if counts[y] > 0 {
            numerator += counts[y] as f64 - config.alpha;
        }
    }
    Ok(numerator / (config.theta + n as f64))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdCheckpoint {
    pub n: u64,
    /// Predictive mass of the target set after step n.
    pub z: f64,
    /// Running frequency of the target set.
    pub xbar: f64,
    /// Derived discount statistic: Q_n = (theta + n) Z_n - n Xbar_n.
    pub q: f64,
    pub distinct: u64,
    pub occupancy: Vec<u64>,
    /// Symbol drawn at step n.
    pub symbol: u16,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdTrajectory {
    pub z0: f64,
    pub checkpoints: Vec<PdCheckpoint>,
    pub terminal_z: f64,
    pub horizon: u64,
    pub dense: Option<DensePath>,
}

impl PdTrajectory {
    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            checkpoints: self
                .checkpoints
                .iter()
                .map(|c| CheckpointView {
                    n: c.n,
                    z: vec![c.z],
                    xbar: vec![c.xbar],
                    s: None,
                })
                .collect(),
            terminal_z: vec![self.terminal_z],
            horizon: self.horizon,
        }
    }
}

/// Simulates the predictive sequence, drawing each symbol from the current
/// predictive distribution with one uniform per step.
pub fn pd_simulate(
    config: &PdConfig,
    master_seed: u64,
    replication_id: u64,
    options: &SimOptions,
) -> Result<PdTrajectory, PdError> {
    config.validate()?;
    let alphabet = config.alphabet_size();
    let mut draw_src = derive_stream(StreamKey::draw(master_seed, replication_id));
    let mut counts = vec![0u64; alphabet];
    let mut distinct = 0usize;
    let mut target_count = 0u64;
    let mut is_target = vec![false; alphabet];
    for &y in &config.target {
        is_target[y] = true;
    }
    let dense = options.storage == StorageMode::Dense;
    let mut z_dense = Vec::new();
    let mut x_dense = Vec::new();
    let z0 = config.nu_of_target();
    if dense {
        z_dense.reserve(config.horizon as usize + 1);
        x_dense.reserve(config.horizon as usize);
        z_dense.push(z0);
    }
    let mut weights = vec![0.0f64; alphabet];
    let mut records = Vec::with_capacity(config.checkpoints.len());
    let mut next_checkpoint = 0usize;
    for n in 1..=config.horizon {
        // Unnormalized predictive weights given the first n-1 symbols; they
        // sum to theta + (n-1).
        let boost = config.theta + config.alpha * distinct as f64;
        let mut total = 0.0;
        for y in 0..alphabet {
            let occupied = if counts[y] > 0 {
                counts[y] as f64 - config.alpha
            } else {
                0.0
            };
            let w = occupied + boost * config.base_measure[y];
            weights[y] = w;
            total += w;
        }
        let threshold = draw_src.next_f64() * total;
        let mut symbol = alphabet - 1;
        let mut cum = 0.0;
        for (y, &w) in weights.iter().enumerate() {
            cum += w;
            if threshold < cum {
                symbol = y;
                break;
            }
        }
        if counts[symbol] == 0 {
            distinct += 1;
        }
        counts[symbol] += 1;
        if is_target[symbol] {
            target_count += 1;
        }
        let z = pd_predictive(&counts, n, config, &config.target)
            .expect("counts are consistent by construction");
        if dense {
            z_dense.push(z);
            x_dense.push(is_target[symbol] as u8);
        }
        if next_checkpoint < config.checkpoints.len() && config.checkpoints[next_checkpoint] == n {
            next_checkpoint += 1;
            let xbar = target_count as f64 / n as f64;
            records.push(PdCheckpoint {
                n,
                z,
                xbar,
                q: (config.theta + n as f64) * z - n as f64 * xbar,
                distinct: distinct as u64,
                occupancy: counts.clone(),
                symbol: symbol as u16,
            });
        }
    }
    let terminal_z = records
        .last()
        .filter(|c| c.n == config.horizon)
        .map(|c| c.z)
        .unwrap_or_else(|| {
            pd_predictive(&counts, config.horizon, config, &config.target).expect("consistent")
        });
    Ok(PdTrajectory {
        z0,
        checkpoints: records,
        terminal_z,
        horizon: config.horizon,
        dense: dense.then_some(DensePath {
            z: z_dense,
            x: x_dense,
        }),
    })
}

/// Deterministic bound on the discount statistic:
/// |Q_n| <= alpha |Y| + (theta + alpha |Y|).
pub fn q_bound(config: &PdConfig) -> f64 {
    let d = config.alphabet_size() as f64;
    config.alpha * d + (config.theta.abs() + config.alpha * d)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdBoundPoint {
    pub n: u64,
    pub c_abs: f64,
    pub bound: f64,
    pub q_abs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdBoundReport {
    pub points: Vec<PdBoundPoint>,
    pub max_c_abs: f64,
    pub q_bound: f64,
}

/// Verifies the pathwise estimation-error bound
/// |C_n| <= sqrt(n) (theta + |Q_n|) / (theta + n) with |Q_n| <= q_bound at
/// every checkpoint. A violation signals a bug, not randomness.
pub fn pd_bound_check(trajectory: &PdTrajectory, config: &PdConfig) -> Result<PdBoundReport, PdError> {
    const SLACK: f64 = 1e-9;
    let q_cap = q_bound(config);
    let mut points = Vec::with_capacity(trajectory.checkpoints.len());
    let mut max_c_abs = 0.0f64;
    for record in &trajectory.checkpoints {
        let n = record.n;
        let sqrt_n = (n as f64).sqrt();
        let c = sqrt_n * (record.xbar - record.z);
        let bound = sqrt_n * (config.theta + record.q.abs()) / (config.theta + n as f64);
        if c.abs() > bound + SLACK {
            return Err(PdError::BoundViolated {
                n,
                c_abs: c.abs(),
                bound,
            });
        }
        if record.q.abs() > q_cap + SLACK {
            return Err(PdError::BoundViolated {
                n,
                c_abs: record.q.abs(),
                bound: q_cap,
            });
        }
        max_c_abs = max_c_abs.max(c.abs());
        points.push(PdBoundPoint {
            n,
            c_abs: c.abs(),
            bound,
            q_abs: record.q.abs(),
        });
    }
    Ok(PdBoundReport {
        points,
        max_c_abs,
        q_bound: q_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(alpha: f64, theta: f64, alphabet: usize, horizon: u64) -> PdConfig {
        PdConfig {
            alpha,
            theta,
            base_measure: vec![1.0 / alphabet as f64; alphabet],
            target: vec![0],
            horizon,
            checkpoints: crate::urn::geometric_checkpoints(horizon),
        }
    }

    #[test]
    fn predictive_at_time_zero_is_base_mass() {
        let cfg = config(0.5, 1.0, 4, 10);
        let z = pd_predictive(&[0, 0, 0, 0], 0, &cfg, &[0, 1]).unwrap();
        assert!((z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn predictive_hand_value() {
        // Two symbols, uniform nu, theta = 1, alpha = 0.5, one observation of
        // "a", A = {a}: ((1 - 0.5) + (1 + 0.5) * 0.5) / 2 = 0.625.
        let cfg = config(0.5, 1.0, 2, 10);
        let z = pd_predictive(&[1, 0], 1, &cfg, &[0]).unwrap();
        assert!((z - 0.625).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_reduces_to_dirichlet_form() {
        let cfg = config(0.0, 2.0, 3, 10);
        let counts = [4u64, 1, 0];
        let z = pd_predictive(&counts, 5, &cfg, &[0, 2]).unwrap();
        let expected = (4.0 + 2.0 * (2.0 / 3.0)) / (2.0 + 5.0);
        assert!((z - expected).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let cfg = config(0.0, 1.0, 2, 10);
        assert!(matches!(
            pd_predictive(&[1, 1], 3, &cfg, &[0]),
            Err(PdError::InconsistentCounts { got: 2, expected: 3 })
        ));
    }

    #[test]
    fn full_space_target_pins_z_at_one() {
        let cfg = PdConfig {
            target: vec![0, 1, 2],
            ..config(0.3, 0.7, 3, 64)
        };
        let traj = pd_simulate(&cfg, 11, 0, &SimOptions::default()).unwrap();
        for record in &traj.checkpoints {
            assert!((record.z - 1.0).abs() < 1e-12, "z = {} at n={}", record.z, record.n);
        }
    }

    #[test]
    fn large_theta_pins_z1_near_base_mass() {
        let cfg = config(0.0, 100.0, 2, 1);
        for rep in 0..20 {
            let traj = pd_simulate(&cfg, 5, rep, &SimOptions::default()).unwrap();
            let z1 = traj.checkpoints[0].z;
            assert!((z1 - 0.5).abs() <= 1.0 / 101.0 + 1e-15, "z1 = {z1}");
        }
    }

    #[test]
    fn predictive_normalization_along_paths() {
        let cfg = config(0.5, 1.0, 4, 200);
        for rep in 0..20 {
            let traj = pd_simulate(&cfg, 17, rep, &SimOptions::default()).unwrap();
            for record in &traj.checkpoints {
                // Sum of singleton predictive masses after step n.
                let mut sum = 0.0;
                for y in 0..4 {
                    sum += pd_predictive(&record.occupancy, record.n, &cfg, &[y]).unwrap();
                }
                assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at n={}", record.n);
            }
        }
    }

    #[test]
    fn symmetric_binary_dirichlet_mean_is_half() {
        // alpha = 0, theta = 1, two symbols, uniform nu, A one symbol:
        // symmetry forces E Z_n = 1/2 at every n.
        let cfg = config(0.0, 1.0, 2, 50);
        let reps = 100_000u64;
        let mut sum = 0.0;
        for rep in 0..reps {
            sum += pd_simulate(&cfg, 23, rep, &SimOptions::default())
                .unwrap()
                .terminal_z;
        }
        let mean = sum / reps as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn alpha_zero_prefix_is_exchangeable() {
        // Empirical law of (Y_1, Y_2) vs the swapped pair over 1e5 runs.
        let cfg = PdConfig {
            checkpoints: vec![1, 2],
            ..config(0.0, 1.0, 3, 2)
        };
        let reps = 100_000u64;
        let mut joint = vec![vec![0u64; 3]; 3];
        for rep in 0..reps {
            let traj = pd_simulate(&cfg, 29, rep, &SimOptions::default()).unwrap();
            let y1 = traj.checkpoints[0].symbol as usize;
            let y2 = traj.checkpoints[1].symbol as usize;
            joint[y1][y2] += 1;
        }
        let mut tv = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let p = joint[a][b] as f64 / reps as f64;
                let q = joint[b][a] as f64 / reps as f64;
                tv += (p - q).abs();
            }
        }
        tv *= 0.5;
        assert!(tv < 0.01, "tv {tv}");
    }

    #[test]
    fn q_is_recovered_from_the_identity() {
        // Q_n recomputed from (theta + n) Z_n - n Xbar_n must equal the
        // direct formula.
        let cfg = config(0.5, 1.0, 4, 128);
        let traj = pd_simulate(&cfg, 31, 4, &SimOptions::default()).unwrap();
        for record in &traj.checkpoints {
            let distinct = record.occupancy.iter().filter(|&&c| c > 0).count() as f64;
            let in_target_occupied: f64 = cfg
                .target
                .iter()
                .filter(|&&y| record.occupancy[y] > 0)
                .count() as f64;
            let direct = -cfg.alpha * in_target_occupied
                + (cfg.theta + cfg.alpha * distinct) * cfg.nu_of_target();
            assert!(
                (record.q - direct).abs() < 1e-9,
                "n={}: {} vs {}",
                record.n,
                record.q,
                direct
            );
        }
    }

    #[test]
    fn bound_check_holds_and_is_tight_at_stated_scale() {
        let cfg = config(0.5, 1.0, 4, 10_000);
        for rep in 0..10 {
            let traj = pd_simulate(&cfg, 37, rep, &SimOptions::default()).unwrap();
            let report = pd_bound_check(&traj, &cfg).unwrap();
            // theta + q_bound = 1 + (2 + 3) = 6, and sqrt(n)/(theta+n) at
            // n = 1e4 is below 1/100: the terminal bound is at most 0.06.
            let last = report.points.last().unwrap();
            assert_eq!(last.n, 10_000);
            assert!(last.bound <= 0.06);
            assert!(last.c_abs <= 0.06);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(config(1.0, 1.0, 2, 10).validate().is_err());
        assert!(config(-0.1, 1.0, 2, 10).validate().is_err());
        let mut bad = config(0.5, -0.6, 2, 10);
        assert!(bad.validate().is_err());
        bad = config(0.0, 1.0, 2, 10);
        bad.base_measure = vec![0.6, 0.6];
        assert!(bad.validate().is_err());
        bad = config(0.0, 1.0, 2, 10);
        bad.target = vec![5];
        assert!(bad.validate().is_err());
    }
}
