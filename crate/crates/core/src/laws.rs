//! Nonnegative reinforcement laws and per-color, time-indexed schedules.
//!
//! Laws carry their own mean and second moment; the declared values are
//! validated against the law's actual moments at construction (1e-9
//! relative), so downstream limit-variance formulas can trust them.
//! Schedules enforce the equal-mean constraint across colors and a strictly
//! positive limit mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::kahan_sum;
use crate::streams::UniformSource;

/// Relative tolerance for declared-vs-computed moments.
pub const MOMENT_TOLERANCE: f64 = 1e-9;

/// Grid size used for bounded-continuous laws given as inverse-CDF tables.
pub const INVERSE_CDF_POINTS: usize = 4096;

#[derive(Debug, Error)]
pub enum LawError {
    #[error("support values must be nonnegative, found {0}")]
    NegativeSupport(f64),
    #[error("probabilities must be nonnegative and sum to 1 (sum = {0})")]
    BadProbabilities(f64),
    #[error("discrete law needs matching, nonempty values/probabilities")]
    EmptySupport,
    #[error("inverse-CDF table must be nondecreasing")]
    NonMonotoneTable,
    #[error("inverse-CDF table needs at least 2 points, got {0}")]
    TableTooShort(usize),
    #[error("declared {name} {declared} does not match computed {computed}")]
    MomentMismatch {
        name: &'static str,
        declared: f64,
        computed: f64,
    },
    #[error("law moments must be finite")]
    NonFiniteMoment,
}

/// The supported law shapes. All are bounded, so every moment exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Constant(f64),
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    /// Bounded-continuous law represented by its quantile function sampled
    /// on a uniform grid over [0, 1], interpolated linearly.
    InverseCdfTable { quantiles: Vec<f64> },
}

/// A validated reinforcement law with its first two moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReinforcementLaw {
    kind: LawKind,
    mean: f64,
    second_moment: f64,
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MOMENT_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

impl ReinforcementLaw {
    /// Builds a law, computing its moments exactly from the kind.
    pub fn new(kind: LawKind) -> Result<Self, LawError> {
        let (mean, second_moment) = Self::compute_moments(&kind)?;
        if !mean.is_finite() || !second_moment.is_finite() {
            return Err(LawError::NonFiniteMoment);
        }
        Ok(Self {
            kind,
            mean,
            second_moment,
        })
    }

    /// Builds a law and checks the caller's declared moments against the
    /// computed ones (1e-9 relative).
    pub fn with_declared(
        kind: LawKind,
        declared_mean: f64,
        declared_second_moment: f64,
    ) -> Result<Self, LawError> {
        let law = Self::new(kind)?;
        if !rel_close(declared_mean, law.mean) {
            return Err(LawError::MomentMismatch {
                name: "mean",
                declared: declared_mean,
                computed: law.mean,
            });
        }
        if !rel_close(declared_second_moment, law.second_moment) {
            return Err(LawError::MomentMismatch {
                name: "second moment",
                declared: declared_second_moment,
                computed: law.second_moment,
            });
        }
        Ok(law)
    }

    pub fn constant(value: f64) -> Result<Self, LawError> {
        Self::new(LawKind::Constant(value))
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, LawError> {
        Self::new(LawKind::Discrete { values, probs })
    }

    /// Uniform law over the given support points.
    pub fn discrete_uniform(values: &[f64]) -> Result<Self, LawError> {
        let p = 1.0 / values.len() as f64;
        Self::discrete(values.to_vec(), vec![p; values.len()])
    }

    /// Bounded-continuous law from quantile values on a uniform grid.
    pub fn from_inverse_cdf(quantiles: Vec<f64>) -> Result<Self, LawError> {
        Self::new(LawKind::InverseCdfTable { quantiles })
    }

    fn compute_moments(kind: &LawKind) -> Result<(f64, f64), LawError> {
        match kind {
            LawKind::Constant(v) => {
                if *v < 0.0 {
                    return Err(LawError::NegativeSupport(*v));
                }
                Ok((*v, v * v))
            }
            LawKind::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(LawError::EmptySupport);
                }
                for &v in values {
                    if v < 0.0 {
                        return Err(LawError::NegativeSupport(v));
                    }
                }
                if probs.iter().any(|&p| p < 0.0) {
                    return Err(LawError::BadProbabilities(f64::NAN));
                }
                let total = kahan_sum(probs.iter().copied());
                if (total - 1.0).abs() > 1e-12 {
                    return Err(LawError::BadProbabilities(total));
                }
                let mean = kahan_sum(values.iter().zip(probs).map(|(v, p)| v * p));
                let m2 = kahan_sum(values.iter().zip(probs).map(|(v, p)| v * v * p));
                Ok((mean, m2))
            }
            LawKind::InverseCdfTable { quantiles } => {
                if quantiles.len() < 2 {
                    return Err(LawError::TableTooShort(quantiles.len()));
                }
                for pair in quantiles.windows(2) {
                    if pair[1] < pair[0] {
                        return Err(LawError::NonMonotoneTable);
                    }
                }
                if quantiles[0] < 0.0 {
                    return Err(LawError::NegativeSupport(quantiles[0]));
                }
                // Piecewise-linear quantile function: the integrals of Q and
                // Q^2 over each cell are exact (trapezoid / quadratic rule).
                let cells = quantiles.len() - 1;
                let du = 1.0 / cells as f64;
                let mean = kahan_sum(
                    quantiles
                        .windows(2)
                        .map(|w| 0.5 * (w[0] + w[1]) * du),
                );
                let m2 = kahan_sum(
                    quantiles
                        .windows(2)
                        .map(|w| du / 3.0 * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1])),
                );
                Ok((mean, m2))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// Quantile transform: maps a uniform variate to a draw from the law.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.kind {
            LawKind::Constant(v) => *v,
            LawKind::Discrete { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("nonempty support")
            }
            LawKind::InverseCdfTable { quantiles } => {
                let cells = (quantiles.len() - 1) as f64;
                let pos = u * cells;
                let idx = (pos as usize).min(quantiles.len() - 2);
                let frac = pos - idx as f64;
                quantiles[idx] + (quantiles[idx + 1] - quantiles[idx]) * frac
            }
        }
    }

    /// One draw from the law. Consumes exactly one uniform regardless of the
    /// law kind (constant laws draw and discard), so stream alignment never
    /// depends on which laws a schedule mixes.
    pub fn sample(&self, source: &mut UniformSource) -> f64 {
        let u = source.next_f64();
        self.quantile(u)
    }

    /// Support points and probabilities for enumeration. `None` for
    /// continuous laws.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            LawKind::Constant(v) => Some(vec![(*v, 1.0)]),
            LawKind::Discrete { values, probs } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
            LawKind::InverseCdfTable { .. } => None,
        }
    }

    /// Expectation of an arbitrary function under the law. Discrete laws are
    /// summed exactly; table laws use the trapezoid rule on the quantile
    /// grid.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match &self.kind {
            LawKind::Constant(v) => f(*v),
            LawKind::Discrete { values, probs } => {
                kahan_sum(values.iter().zip(probs).map(|(v, p)| f(*v) * p))
            }
            LawKind::InverseCdfTable { quantiles } => {
                let du = 1.0 / (quantiles.len() - 1) as f64;
                kahan_sum(
                    quantiles
                        .windows(2)
                        .map(|w| 0.5 * (f(w[0]) + f(w[1])) * du),
                )
            }
        }
    }
}

/// How a step's reinforcement vector is coupled across colors. Only the
/// drawn color's value is ever applied, so the trajectory law is identical
/// under both options; the choice fixes per-step uniform consumption
/// (one per color vs one shared).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    Independent,
    Comonotone,
}

/// One color's laws over time: explicit laws for the first steps, then a
/// tail law repeated forever. The tail realizes exactly the moment
/// stabilization the limit formulas assume.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColorSchedule {
    head: Vec<ReinforcementLaw>,
    tail: ReinforcementLaw,
}

impl ColorSchedule {
    pub fn new(head: Vec<ReinforcementLaw>, tail: ReinforcementLaw) -> Self {
        Self { head, tail }
    }

    pub fn constant_law(tail: ReinforcementLaw) -> Self {
        Self { head: Vec::new(), tail }
    }

    /// Law in force at time `n >= 1`.
    pub fn law_at(&self, n: u64) -> &ReinforcementLaw {
        if n >= 1 && (n as usize) <= self.head.len() {
            &self.head[n as usize - 1]
        } else {
            &self.tail
        }
    }

    pub fn tail(&self) -> &ReinforcementLaw {
        &self.tail
    }

    pub fn head_len(&self) -> usize {
        self.head.len()
    }
}

/// Full reinforcement specification for a d-color urn.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReinforcementSchedule {
    colors: Vec<ColorSchedule>,
    pairing: Pairing,
    /// The moment exponent u > 2 under which the tail moment bound is
    /// declared. Recorded and surfaced in reports; the laws here are
    /// bounded, so every exponent holds.
    moment_exponent: f64,
}

/// A structural problem found by [`ReinforcementSchedule::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleViolation {
    pub time_index: Option<u64>,
    pub color: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.time_index, self.color) {
            (Some(n), Some(c)) => write!(f, "at n={n}, color {c}: {}", self.message),
            (Some(n), None) => write!(f, "at n={n}: {}", self.message),
            (None, Some(c)) => write!(f, "color {c}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl ReinforcementSchedule {
    pub fn new(colors: Vec<ColorSchedule>, pairing: Pairing, moment_exponent: f64) -> Self {
        Self {
            colors,
            pairing,
            moment_exponent,
        }
    }

    /// Same constant-in-time law for every color.
    pub fn homogeneous(num_colors: usize, law: ReinforcementLaw, pairing: Pairing) -> Self {
        Self::new(
            (0..num_colors)
                .map(|_| ColorSchedule::constant_law(law.clone()))
                .collect(),
            pairing,
            3.0,
        )
    }

    pub fn num_colors(&self) -> usize {
        self.colors.len()
    }

    pub fn pairing(&self) -> Pairing {
        self.pairing
    }

    pub fn moment_exponent(&self) -> f64 {
        self.moment_exponent
    }

    pub fn law_at(&self, color: usize, n: u64) -> &ReinforcementLaw {
        self.colors[color].law_at(n)
    }

    pub fn color(&self, color: usize) -> &ColorSchedule {
        &self.colors[color]
    }

    /// Limit mean m = mean of the repeated tail law (equal across colors on
    /// a valid schedule).
    pub fn limit_mean(&self) -> f64 {
        self.colors[0].tail().mean()
    }

    /// Limit second moment q_j of color j's tail law.
    pub fn limit_second_moment(&self, color: usize) -> f64 {
        self.colors[color].tail().second_moment()
    }

    /// Structural validation. Returns an empty list iff every color has the
    /// same mean at every time, the limit mean is strictly positive, and all
    /// moments are finite and consistent.
    pub fn validate(&self) -> Vec<ScheduleViolation> {
        let mut violations = Vec::new();
        if self.colors.len() < 2 {
            violations.push(ScheduleViolation {
                time_index: None,
                color: None,
                message: format!("schedule needs at least 2 colors, has {}", self.colors.len()),
            });
            return violations;
        }
        let horizon = self.colors.iter().map(|c| c.head_len()).max().unwrap_or(0) as u64 + 1;
        for n in 1..=horizon {
            let reference = self.colors[0].law_at(n).mean();
            for (j, color) in self.colors.iter().enumerate().skip(1) {
                let mean = color.law_at(n).mean();
                if !rel_close(mean, reference) {
                    violations.push(ScheduleViolation {
                        time_index: Some(n),
                        color: Some(j),
                        message: format!(
                            "equal-mean constraint broken: mean {mean} != color 0 mean {reference}"
                        ),
                    });
                }
            }
        }
        if self.limit_mean() <= 0.0 {
            violations.push(ScheduleViolation {
                time_index: None,
                color: None,
                message: format!("m must be positive, tail mean is {}", self.limit_mean()),
            });
        }
        for (j, color) in self.colors.iter().enumerate() {
            for law in color.head.iter().chain(std::iter::once(color.tail())) {
                if !law.mean().is_finite() || !law.second_moment().is_finite() {
                    violations.push(ScheduleViolation {
                        time_index: None,
                        color: Some(j),
                        message: "law has non-finite moments".into(),
                    });
                }
            }
        }
        if !(self.moment_exponent > 2.0) {
            violations.push(ScheduleViolation {
                time_index: None,
                color: None,
                message: format!(
                    "moment exponent must exceed 2, got {}",
                    self.moment_exponent
                ),
            });
        }
        violations
    }

    /// Draws the reinforcement vector for step `n` into `out`. Independent
    /// pairing consumes one uniform per color; comonotone pairing consumes a
    /// single shared uniform.
    pub fn sample_step(&self, n: u64, source: &mut UniformSource, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.colors.len());
        match self.pairing {
            Pairing::Independent => {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = self.colors[j].law_at(n).sample(source);
                }
            }
            Pairing::Comonotone => {
                let u = source.next_f64();
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = self.colors[j].law_at(n).quantile(u);
                }
            }
        }
    }
}
