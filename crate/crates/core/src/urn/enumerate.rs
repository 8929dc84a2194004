//! Exact small-horizon distribution of a two-color urn by exhaustive path
//! enumeration. This is the independent oracle the simulator is checked
//! against: it applies the same weight-update arithmetic as the stepper, so
//! atoms of the exact law and simulated values agree bit for bit.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::laws::ReinforcementSchedule;
use crate::urn::TwoColorConfig;

/// Hard cap on the number of enumerated paths.
pub const MAX_PATHS: u128 = 10_000_000;

/// Maximum horizon and per-law support size accepted by the oracle.
pub const MAX_HORIZON: u64 = 12;
pub const MAX_SUPPORT: usize = 4;

#[derive(Debug, Error)]
pub enum EnumerateError {
    #[error("enumeration horizon {0} exceeds {MAX_HORIZON}")]
    HorizonTooLarge(u64),
    #[error("enumeration requires discrete laws with at most {MAX_SUPPORT} support points")]
    UnsupportedLaw,
    #[error("enumeration would expand {0} paths (cap {MAX_PATHS})")]
    TooManyPaths(u128),
    #[error("horizon {requested} exceeds configured horizon {configured}")]
    BeyondConfig { requested: u64, configured: u64 },
}

/// One atom of the exact joint law of (Z_n, Xbar_n).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactAtom {
    pub z: f64,
    pub xbar: f64,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub n: u64,
    pub atoms: Vec<ExactAtom>,
}

impl ExactDistribution {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability).sum()
    }

    /// Marginal law of Z_n, aggregating over the draw frequency.
    pub fn marginal_z(&self) -> Vec<(f64, f64)> {
        let mut map: BTreeMap<u64, f64> = BTreeMap::new();
        for atom in &self.atoms {
            *map.entry(atom.z.to_bits()).or_insert(0.0) += atom.probability;
        }
        map.into_iter()
            .map(|(bits, p)| (f64::from_bits(bits), p))
            .collect()
    }

    /// Total-variation distance between the exact marginal law of Z_n and an
    /// empirical sample. Sample values off the exact support count fully
    /// against the distance.
    pub fn tv_against_z_samples(&self, samples: &[f64]) -> f64 {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for &z in samples {
            *counts.entry(z.to_bits()).or_insert(0) += 1;
        }
        let n = samples.len() as f64;
        let mut tv = 0.0;
        for (z, p) in self.marginal_z() {
            let emp = counts.remove(&z.to_bits()).unwrap_or(0) as f64 / n;
            tv += (emp - p).abs();
        }
        // Whatever is left in the empirical map has no exact counterpart.
        for (_, c) in counts {
            tv += c as f64 / n;
        }
        0.5 * tv
    }
}

fn support_at(
    schedule: &ReinforcementSchedule,
    color: usize,
    n: u64,
) -> Result<Vec<(f64, f64)>, EnumerateError> {
    let support = schedule
        .law_at(color, n)
        .support()
        .ok_or(EnumerateError::UnsupportedLaw)?;
    if support.len() > MAX_SUPPORT {
        return Err(EnumerateError::UnsupportedLaw);
    }
    Ok(support)
}

/// Exact joint law of (Z_n, Xbar_n) for a two-color urn with discrete laws,
/// by exhaustive enumeration of draw and reinforcement outcomes.
pub fn enumerate_exact(
    config: &TwoColorConfig,
    n: u64,
) -> Result<ExactDistribution, EnumerateError> {
    if n > MAX_HORIZON {
        return Err(EnumerateError::HorizonTooLarge(n));
    }
    if n > config.horizon {
        return Err(EnumerateError::BeyondConfig {
            requested: n,
            configured: config.horizon,
        });
    }
    let mut per_step: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = Vec::with_capacity(n as usize);
    let mut paths: u128 = 1;
    for k in 1..=n {
        let black = support_at(&config.schedule, 0, k)?;
        let red = support_at(&config.schedule, 1, k)?;
        paths = paths.saturating_mul((black.len() + red.len()) as u128);
        if paths > MAX_PATHS {
            return Err(EnumerateError::TooManyPaths(paths));
        }
        per_step.push((black, red));
    }

    let mut atoms: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    // Depth-first over (step, black weight, total weight, black count, prob).
    let mut stack = vec![(0usize, config.initial_black, config.initial_black + config.initial_red, 0u64, 1.0f64)];
    while let Some((k, w, s, blacks, prob)) = stack.pop() {
        if k == n as usize {
            let z = w / s;
            let xbar = blacks as f64 / n as f64;
            *atoms.entry((z.to_bits(), xbar.to_bits())).or_insert(0.0) += prob;
            continue;
        }
        let p_black = w / s;
        let (black_support, red_support) = &per_step[k];
        for &(value, p) in black_support {
            stack.push((k + 1, w + value, s + value, blacks + 1, prob * p_black * p));
        }
        for &(value, p) in red_support {
            stack.push((k + 1, w, s + value, blacks, prob * (1.0 - p_black) * p));
        }
    }

    Ok(ExactDistribution {
        n,
        atoms: atoms
            .into_iter()
            .map(|((zb, xb), probability)| ExactAtom {
                z: f64::from_bits(zb),
                xbar: f64::from_bits(xb),
                probability,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{Pairing, ReinforcementLaw, ReinforcementSchedule};
    use crate::urn::{geometric_checkpoints, simulate, SimOptions};

    fn unit_polya(horizon: u64) -> TwoColorConfig {
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
    fn one_step_law_by_hand() {
        let exact = enumerate_exact(&unit_polya(1), 1).unwrap();
        assert_eq!(exact.atoms.len(), 2);
        let find = |z: f64| {
            exact
                .atoms
                .iter()
                .find(|a| (a.z - z).abs() < 1e-15)
                .unwrap()
        };
        let low = find(1.0 / 3.0);
        assert_eq!(low.xbar, 0.0);
        assert!((low.probability - 0.5).abs() < 1e-15);
        let high = find(2.0 / 3.0);
        assert_eq!(high.xbar, 1.0);
        assert!((high.probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_step_law_by_hand() {
        // Four paths with probabilities (1/3, 1/6, 1/6, 1/3); the middle two
        // share (Z, Xbar) = (1/2, 1/2).
        let exact = enumerate_exact(&unit_polya(2), 2).unwrap();
        assert_eq!(exact.atoms.len(), 3);
        let find = |z: f64| {
            exact
                .atoms
                .iter()
                .find(|a| (a.z - z).abs() < 1e-15)
                .unwrap()
        };
        assert!((find(0.25).probability - 1.0 / 3.0).abs() < 1e-15);
        assert!((find(0.5).probability - 1.0 / 3.0).abs() < 1e-15);
        assert!((find(0.75).probability - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(find(0.5).xbar, 0.5);
    }

    #[test]
    fn mass_sums_to_one() {
        let config = TwoColorConfig {
            schedule: ReinforcementSchedule::homogeneous(
                2,
                ReinforcementLaw::discrete_uniform(&[1.0, 2.0]).unwrap(),
                Pairing::Independent,
            ),
            ..unit_polya(6)
        };
        let exact = enumerate_exact(&config, 6).unwrap();
        assert!((exact.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explosion_guard_trips() {
        let config = TwoColorConfig {
            schedule: ReinforcementSchedule::homogeneous(
                2,
                ReinforcementLaw::discrete_uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
                Pairing::Independent,
            ),
            ..unit_polya(12)
        };
        assert!(matches!(
            enumerate_exact(&config, 12),
            Err(EnumerateError::TooManyPaths(_))
        ));
        assert!(matches!(
            enumerate_exact(&unit_polya(12), 13),
            Err(EnumerateError::HorizonTooLarge(13))
        ));
    }

    #[test]
    fn empirical_law_matches_oracle_in_tv() {
        // Simulator-oracle agreement on the 2-step law, 100k replications.
        let config = unit_polya(2);
        let exact = enumerate_exact(&config, 2).unwrap();
        let samples: Vec<f64> = (0..100_000u64)
            .map(|rep| {
                simulate(&config, 8086, rep, &SimOptions::default())
                    .unwrap()
                    .terminal_z[0]
            })
            .collect();
        let tv = exact.tv_against_z_samples(&samples);
        assert!(tv < 0.01, "tv = {tv}");
    }
}
