//! Randomly reinforced urns with two or more colors.
//!
//! At each step a color is drawn proportionally to current weights, a
//! reinforcement vector is drawn for all colors, and only the drawn color's
//! reinforcement is added. Reinforcements for every color are drawn each
//! step even though one is applied: the vector exists independently of the
//! draw, and per-step uniform consumption stays constant, which keeps
//! replications reproducible under any schedule.

mod enumerate;

pub use enumerate::{enumerate_exact, EnumerateError, ExactAtom, ExactDistribution};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clt::{CheckpointView, DensePath, TrajectorySummary};
use crate::laws::{ReinforcementSchedule, ScheduleViolation};
use crate::streams::{derive_stream, StreamKey, UniformSource};

#[derive(Debug, Error)]
pub enum UrnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("schedule violations: {}", format_violations(.0))]
    Schedule(Vec<ScheduleViolation>),
    #[error("non-finite urn weights at step {step} (overflow or misconfiguration)")]
    NonFiniteWeights { step: u64 },
}

fn format_violations(violations: &[ScheduleViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Whether a run keeps the full per-step predictive path of the tracked
/// color. Dense storage is what the convergence-rate diagnostics consume;
/// checkpoint storage is enough for the scaled prediction errors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageMode {
    #[default]
    Checkpoint,
    Dense,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    pub storage: StorageMode,
    /// Color whose predictive path is tracked in dense mode and reported by
    /// the scalar statistics.
    pub tracked_color: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoColorConfig {
    pub initial_black: f64,
    pub initial_red: f64,
    pub schedule: ReinforcementSchedule,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiColorConfig {
    pub initial_weights: Vec<f64>,
    pub schedule: ReinforcementSchedule,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
}

fn validate_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<(), UrnError> {
    if checkpoints.is_empty() {
        return Err(UrnError::InvalidConfig("checkpoints must be nonempty".into()));
    }
    if !checkpoints.windows(2).all(|w| w[0] < w[1]) {
        return Err(UrnError::InvalidConfig(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    if checkpoints[0] < 1 || *checkpoints.last().unwrap() > horizon {
        return Err(UrnError::InvalidConfig(format!(
            "checkpoints must lie in [1, horizon={horizon}]"
        )));
    }
    Ok(())
}

impl TwoColorConfig {
    pub fn validate(&self) -> Result<(), UrnError> {
        if !(self.initial_black > 0.0) || !(self.initial_red > 0.0) {
            return Err(UrnError::InvalidConfig(format!(
                "initial weights must be positive, got b={} r={}",
                self.initial_black, self.initial_red
            )));
        }
        if self.schedule.num_colors() != 2 {
            return Err(UrnError::InvalidConfig(format!(
                "two-color urn needs a 2-color schedule, got {}",
                self.schedule.num_colors()
            )));
        }
        let violations = self.schedule.validate();
        if !violations.is_empty() {
            return Err(UrnError::Schedule(violations));
        }
        if self.horizon < 1 {
            return Err(UrnError::InvalidConfig("horizon must be >= 1".into()));
        }
        validate_checkpoints(&self.checkpoints, self.horizon)
    }

    fn initial_weights(&self) -> Vec<f64> {
        vec![self.initial_black, self.initial_red]
    }
}

impl MultiColorConfig {
    pub fn validate(&self) -> Result<(), UrnError> {
        if self.initial_weights.len() < 2 {
            return Err(UrnError::InvalidConfig(format!(
                "multicolor urn needs d >= 2 colors, got {}",
                self.initial_weights.len()
            )));
        }
        if self.initial_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(UrnError::InvalidConfig(
                "all initial weights must be positive".into(),
            ));
        }
        if self.schedule.num_colors() != self.initial_weights.len() {
            return Err(UrnError::InvalidConfig(format!(
                "schedule has {} colors but urn has {}",
                self.schedule.num_colors(),
                self.initial_weights.len()
            )));
        }
        let violations = self.schedule.validate();
        if !violations.is_empty() {
            return Err(UrnError::Schedule(violations));
        }
        if self.horizon < 1 {
            return Err(UrnError::InvalidConfig("horizon must be >= 1".into()));
        }
        validate_checkpoints(&self.checkpoints, self.horizon)
    }
}

/// Geometric checkpoint grid: floor(N / 2^i) for i = 0, 1, ... plus N.
pub fn geometric_checkpoints(horizon: u64) -> Vec<u64> {
    let mut points = Vec::new();
    let mut value = horizon;
    while value >= 1 {
        points.push(value);
        if value == 1 {
            break;
        }
        value /= 2;
    }
    points.sort_unstable();
    points.dedup();
    points
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrawnColor {
    Black,
    Red,
}

impl DrawnColor {
    pub fn index(self) -> usize {
        match self {
            DrawnColor::Black => 0,
            DrawnColor::Red => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoColorState {
    pub black_weight: f64,
    pub total_weight: f64,
}

/// One two-color transition. The color is black iff `draw_uniform` falls
/// below the current black fraction; only the drawn color's reinforcement is
/// applied. Returns the new state, the drawn color, and the new predictive
/// probability of black.
pub fn step_two_color(
    state: TwoColorState,
    draw_uniform: f64,
    reinforcement: (f64, f64),
) -> Result<(TwoColorState, DrawnColor, f64), UrnError> {
    let z = state.black_weight / state.total_weight;
    let (next, color) = if draw_uniform < z {
        (
            TwoColorState {
                black_weight: state.black_weight + reinforcement.0,
                total_weight: state.total_weight + reinforcement.0,
            },
            DrawnColor::Black,
        )
    } else {
        (
            TwoColorState {
                black_weight: state.black_weight,
                total_weight: state.total_weight + reinforcement.1,
            },
            DrawnColor::Red,
        )
    };
    if !next.total_weight.is_finite() || !next.black_weight.is_finite() {
        return Err(UrnError::NonFiniteWeights { step: 0 });
    }
    Ok((next, color, next.black_weight / next.total_weight))
}

/// One d-color transition: inverse-CDF draw over normalized weights, then
/// the drawn color's reinforcement is applied.
pub fn step_multicolor(
    weights: &[f64],
    draw_uniform: f64,
    reinforcements: &[f64],
) -> Result<(Vec<f64>, usize), UrnError> {
    assert_eq!(weights.len(), reinforcements.len());
    let total: f64 = weights.iter().sum();
    let color = pick_color(weights, total, draw_uniform);
    let mut next = weights.to_vec();
    next[color] += reinforcements[color];
    if next.iter().any(|w| !w.is_finite()) {
        return Err(UrnError::NonFiniteWeights { step: 0 });
    }
    Ok((next, color))
}

/// First color whose normalized cumulative weight exceeds `u`. The j = 0
/// comparison `u < w_0 / total` is exactly the two-color black test, so a
/// d = 2 urn reproduces the two-color stepper bit for bit.
#[inline]
fn pick_color(weights: &[f64], total: f64, u: f64) -> usize {
    let mut cum = 0.0;
    for (j, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum / total {
            return j;
        }
    }
    weights.len() - 1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub n: u64,
    /// Predictive probabilities per color after step n.
    pub z: Vec<f64>,
    /// Total weight after step n.
    pub s: f64,
    /// Running draw frequencies per color.
    pub xbar: Vec<f64>,
    /// Color drawn at step n.
    pub draw: u16,
    /// Reinforcement applied at step n.
    pub reinforcement: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UrnTrajectory {
    /// Predictive probabilities at time 0 (initial weight fractions).
    pub z0: Vec<f64>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub terminal_z: Vec<f64>,
    pub terminal_weights: Vec<f64>,
    pub terminal_total: f64,
    pub horizon: u64,
    pub tracked_color: usize,
    /// Per-step path of the tracked color, present in dense mode.
    pub dense: Option<DensePath>,
}

impl UrnTrajectory {
    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            checkpoints: self
                .checkpoints
                .iter()
                .map(|c| CheckpointView {
                    n: c.n,
                    z: c.z.clone(),
                    xbar: c.xbar.clone(),
                    s: Some(c.s),
                })
                .collect(),
            terminal_z: self.terminal_z.clone(),
            horizon: self.horizon,
        }
    }
}

/// Simulates a two-color urn. Color draws come from the replication's draw
/// stream and reinforcements from its reinforcement stream, so the
/// reinforcement pair is independent of the past and of the current draw.
///
/// Per step the draw stream yields one uniform and the reinforcement stream
/// one uniform per color (independent pairing) or one shared uniform
/// (comonotone pairing).
pub fn simulate(
    config: &TwoColorConfig,
    master_seed: u64,
    replication_id: u64,
    options: &SimOptions,
) -> Result<UrnTrajectory, UrnError> {
    config.validate()?;
    simulate_weights(
        &config.initial_weights(),
        &config.schedule,
        config.horizon,
        &config.checkpoints,
        master_seed,
        replication_id,
        options,
    )
}

/// Simulates a d-color urn; same contract as [`simulate`].
pub fn simulate_multicolor(
    config: &MultiColorConfig,
    master_seed: u64,
    replication_id: u64,
    options: &SimOptions,
) -> Result<UrnTrajectory, UrnError> {
    config.validate()?;
    simulate_weights(
        &config.initial_weights,
        &config.schedule,
        config.horizon,
        &config.checkpoints,
        master_seed,
        replication_id,
        options,
    )
}

fn simulate_weights(
    initial: &[f64],
    schedule: &ReinforcementSchedule,
    horizon: u64,
    checkpoints: &[u64],
    master_seed: u64,
    replication_id: u64,
    options: &SimOptions,
) -> Result<UrnTrajectory, UrnError> {
    let tracked = options.tracked_color;
    if tracked >= initial.len() {
        return Err(UrnError::InvalidConfig(format!(
            "tracked color {tracked} out of range for {} colors",
            initial.len()
        )));
    }
    let mut draw_src = derive_stream(StreamKey::draw(master_seed, replication_id));
    let mut reinf_src = derive_stream(StreamKey::reinforcement(master_seed, replication_id));
    let mut engine = UrnEngine::new(initial.to_vec(), schedule.clone(), 0);
    let dense = options.storage == StorageMode::Dense;
    let mut z_dense = Vec::new();
    let mut x_dense = Vec::new();
    if dense {
        z_dense.reserve(horizon as usize + 1);
        x_dense.reserve(horizon as usize);
        z_dense.push(engine.z(tracked));
    }
    let z0: Vec<f64> = (0..initial.len()).map(|j| engine.z(j)).collect();
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;
    for n in 1..=horizon {
        let (color, applied) = engine.step(&mut draw_src, &mut reinf_src)?;
        if dense {
            z_dense.push(engine.z(tracked));
            x_dense.push((color == tracked) as u8);
        }
        if next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == n {
            next_checkpoint += 1;
            records.push(CheckpointRecord {
                n,
                z: (0..initial.len()).map(|j| engine.z(j)).collect(),
                s: engine.total,
                xbar: engine
                    .counts
                    .iter()
                    .map(|&c| c as f64 / n as f64)
                    .collect(),
                draw: color as u16,
                reinforcement: applied,
            });
        }
    }
    let terminal_z: Vec<f64> = (0..initial.len()).map(|j| engine.z(j)).collect();
    Ok(UrnTrajectory {
        z0,
        checkpoints: records,
        terminal_z,
        terminal_weights: engine.weights,
        terminal_total: engine.total,
        horizon,
        tracked_color: tracked,
        dense: dense.then_some(DensePath {
            z: z_dense,
            x: x_dense,
        }),
    })
}

/// Mutable urn state that can be stepped forward. Branch continuations use
/// this directly, feeding both the color draw and the reinforcement vector
/// from a single branch stream.
#[derive(Clone, Debug)]
pub struct UrnEngine {
    pub weights: Vec<f64>,
    pub total: f64,
    pub time: u64,
    pub counts: Vec<u64>,
    schedule: ReinforcementSchedule,
    reinf_buf: Vec<f64>,
}

impl UrnEngine {
    pub fn new(weights: Vec<f64>, schedule: ReinforcementSchedule, time: u64) -> Self {
        let total = weights.iter().sum();
        let d = weights.len();
        Self {
            weights,
            total,
            time,
            counts: vec![0; d],
            schedule,
            reinf_buf: vec![0.0; d],
        }
    }

    /// Rebuilds an engine positioned at the end of a simulated trajectory.
    pub fn resume(trajectory: &UrnTrajectory, schedule: ReinforcementSchedule) -> Self {
        let mut engine = Self::new(
            trajectory.terminal_weights.clone(),
            schedule,
            trajectory.horizon,
        );
        engine.total = trajectory.terminal_total;
        engine
    }

    #[inline]
    pub fn z(&self, color: usize) -> f64 {
        self.weights[color] / self.total
    }

    /// Advances one step, drawing the color from `draw_src` and the
    /// reinforcement vector from `reinf_src` (the two may be the same
    /// stream, consumed in draw-then-reinforcement order).
    #[inline]
    pub fn step(
        &mut self,
        draw_src: &mut UniformSource,
        reinf_src: &mut UniformSource,
    ) -> Result<(usize, f64), UrnError> {
        let n = self.time + 1;
        let u = draw_src.next_f64();
        self.schedule.sample_step(n, reinf_src, &mut self.reinf_buf);
        let color = pick_color(&self.weights, self.total, u);
        let applied = self.reinf_buf[color];
        self.weights[color] += applied;
        self.total += applied;
        if !self.total.is_finite() {
            return Err(UrnError::NonFiniteWeights { step: n });
        }
        self.counts[color] += 1;
        self.time = n;
        Ok((color, applied))
    }

    /// Advances `steps` steps off a single stream and returns the tracked
    /// color's predictive probability at the end.
    pub fn run_on_single_stream(
        &mut self,
        steps: u64,
        tracked: usize,
        stream: &mut UniformSource,
    ) -> Result<f64, UrnError> {
        for _ in 0..steps {
            // A single stream serves both roles; consumption order is fixed.
            let u = stream.next_f64();
            let n = self.time + 1;
            self.schedule.sample_step(n, stream, &mut self.reinf_buf);
            let color = pick_color(&self.weights, self.total, u);
            let applied = self.reinf_buf[color];
            self.weights[color] += applied;
            self.total += applied;
            if !self.total.is_finite() {
                return Err(UrnError::NonFiniteWeights { step: n });
            }
            self.counts[color] += 1;
            self.time = n;
        }
        Ok(self.z(tracked))
    }
}

/// Exact one-step conditional mean of the tracked color's predictive
/// probability: the expectation over both the draw and the step-`next_n`
/// reinforcement laws, given the current weights.
pub fn one_step_conditional_mean(
    weights: &[f64],
    total: f64,
    tracked: usize,
    schedule: &ReinforcementSchedule,
    next_n: u64,
) -> f64 {
    let mut acc = 0.0;
    let w_t = weights[tracked];
    for (j, &w_j) in weights.iter().enumerate() {
        let law = schedule.law_at(j, next_n);
        let p_draw = w_j / total;
        let inner = if j == tracked {
            law.expect(|a| (w_t + a) / (total + a))
        } else {
            law.expect(|a| w_t / (total + a))
        };
        acc += p_draw * inner;
    }
    acc
}
