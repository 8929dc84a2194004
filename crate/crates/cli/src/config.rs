//! Experiment configuration: a single JSON document describing the model,
//! replication count, horizons, checkpoint grids, storage mode, seed and the
//! verification tests to run. Wall-clock seeding is deliberately impossible:
//! `master_seed` is required.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use urnlab_core::clt::ZProxyPolicy;
use urnlab_core::laws::{ColorSchedule, Pairing, ReinforcementLaw, ReinforcementSchedule};
use urnlab_core::pd::PdConfig;
use urnlab_core::stable::Statistic;
use urnlab_core::urn::{
    geometric_checkpoints, MultiColorConfig, SimOptions, StorageMode, TwoColorConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error("config could not be parsed: {0}")]
    Parse(#[from] serde_json::Error),
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSpec {
    Constant { value: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    UniformDiscrete { values: Vec<f64> },
    InverseCdfTable { quantiles: Vec<f64> },
}

impl LawSpec {
    fn build(&self, field: &'static str) -> Result<ReinforcementLaw, ConfigError> {
        let law = match self {
            LawSpec::Constant { value } => ReinforcementLaw::constant(*value),
            LawSpec::Discrete { values, probs } => {
                ReinforcementLaw::discrete(values.clone(), probs.clone())
            }
            LawSpec::UniformDiscrete { values } => ReinforcementLaw::discrete_uniform(values),
            LawSpec::InverseCdfTable { quantiles } => {
                ReinforcementLaw::from_inverse_cdf(quantiles.clone())
            }
        };
        law.map_err(|e| field_err(field, e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub head: Vec<LawSpec>,
    pub tail: LawSpec,
}

impl ScheduleSpec {
    fn build(&self, field: &'static str) -> Result<ColorSchedule, ConfigError> {
        let head = self
            .head
            .iter()
            .map(|law| law.build(field))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ColorSchedule::new(head, self.tail.build(field)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    TwoColor {
        initial_black: f64,
        initial_red: f64,
        black: ScheduleSpec,
        red: ScheduleSpec,
        #[serde(default)]
        pairing: Pairing,
        #[serde(default = "default_moment_exponent")]
        moment_exponent: f64,
    },
    Multicolor {
        initial_weights: Vec<f64>,
        colors: Vec<ScheduleSpec>,
        #[serde(default)]
        pairing: Pairing,
        #[serde(default = "default_moment_exponent")]
        moment_exponent: f64,
    },
    PoissonDirichlet {
        alpha: f64,
        theta: f64,
        base_measure: Vec<f64>,
        target: Vec<usize>,
    },
}

fn default_moment_exponent() -> f64 {
    3.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckpointSpec {
    Named(String),
    Explicit(Vec<u64>),
}

impl Default for CheckpointSpec {
    fn default() -> Self {
        CheckpointSpec::Named("geometric".into())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSpec {
    /// Per-slice KS test of the studentized statistic.
    Studentized {
        statistic: Statistic,
        n: u64,
        #[serde(default)]
        color: usize,
    },
    /// Within-slice independence of the studentized (C, D) pair.
    JointProduct {
        n: u64,
        #[serde(default)]
        color: usize,
    },
    /// Largest point-mass window of the terminal proxies (diagnostic only).
    Atomlessness {
        #[serde(default = "default_window")]
        window: f64,
    },
    /// Pathwise agreement of n / S_n with 1/m.
    SOverN {
        n: u64,
        #[serde(default = "default_one_percent")]
        tolerance: f64,
    },
    /// Median ratio of the tail-variance statistic to V at the proxy.
    DStatVsV {
        n: u64,
        #[serde(default = "default_fifteen_percent")]
        tolerance: f64,
    },
    /// Median ratio of the martingale-array variance statistic to U.
    BStatVsU {
        n: u64,
        #[serde(default = "default_fifteen_percent")]
        tolerance: f64,
    },
}

fn default_window() -> f64 {
    1e-3
}

fn default_one_percent() -> f64 {
    0.01
}

fn default_fifteen_percent() -> f64 {
    0.15
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub replications: u64,
    pub horizon: u64,
    #[serde(default)]
    pub checkpoints: CheckpointSpec,
    /// Checkpoints at which the scaled errors and condition diagnostics are
    /// computed; merged into the checkpoint grid automatically.
    #[serde(default)]
    pub stat_checkpoints: Vec<u64>,
    #[serde(default)]
    pub storage: StorageMode,
    #[serde(default)]
    pub tracked_color: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub tests: Vec<TestSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Dump the first k replications' trajectories as CSV.
    #[serde(default)]
    pub dump_trajectories: u64,
    /// Minimum horizon / n ratio for reporting D_n (proxy-bias control).
    #[serde(default = "default_proxy_ratio")]
    pub min_proxy_ratio: f64,
}

fn default_proxy_ratio() -> f64 {
    10.0
}

/// Core-typed experiment, produced by [`ExperimentConfig::resolve`].
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub model: ResolvedModel,
    pub replications: u64,
    pub stat_ns: Vec<u64>,
    pub options: SimOptions,
    pub master_seed: u64,
    pub tests: Vec<TestSpec>,
    pub policy: ZProxyPolicy,
    pub dump_trajectories: u64,
}

#[derive(Clone, Debug)]
pub enum ResolvedModel {
    TwoColor(TwoColorConfig),
    Multicolor(MultiColorConfig),
    PoissonDirichlet(PdConfig),
}

impl ResolvedModel {
    pub fn horizon(&self) -> u64 {
        match self {
            ResolvedModel::TwoColor(c) => c.horizon,
            ResolvedModel::Multicolor(c) => c.horizon,
            ResolvedModel::PoissonDirichlet(c) => c.horizon,
        }
    }

    /// Limit mean of the reinforcement schedule; 1.0 for the predictive
    /// sequence model, which has no total-weight process.
    pub fn limit_mean(&self) -> f64 {
        match self {
            ResolvedModel::TwoColor(c) => c.schedule.limit_mean(),
            ResolvedModel::Multicolor(c) => c.schedule.limit_mean(),
            ResolvedModel::PoissonDirichlet(_) => 1.0,
        }
    }

    pub fn num_colors(&self) -> usize {
        match self {
            ResolvedModel::TwoColor(_) => 2,
            ResolvedModel::Multicolor(c) => c.initial_weights.len(),
            ResolvedModel::PoissonDirichlet(_) => 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        if self.replications < 1 {
            return Err(field_err("replications", "must be at least 1"));
        }
        if self.horizon < 1 {
            return Err(field_err("horizon", "must be at least 1"));
        }
        let mut checkpoints = match &self.checkpoints {
            CheckpointSpec::Named(name) if name == "geometric" => {
                geometric_checkpoints(self.horizon)
            }
            CheckpointSpec::Named(other) => {
                return Err(field_err(
                    "checkpoints",
                    format!("unknown grid name {other:?}, expected \"geometric\" or a list"),
                ));
            }
            CheckpointSpec::Explicit(list) => {
                if let Some(&bad) = list.iter().find(|&&n| n < 1 || n > self.horizon) {
                    return Err(field_err(
                        "checkpoints",
                        format!("value {bad} outside [1, horizon = {}]", self.horizon),
                    ));
                }
                list.clone()
            }
        };
        for &n in &self.stat_checkpoints {
            if n < 1 || n > self.horizon {
                return Err(field_err(
                    "stat_checkpoints",
                    format!("value {n} outside [1, horizon = {}]", self.horizon),
                ));
            }
            checkpoints.push(n);
        }
        checkpoints.sort_unstable();
        checkpoints.dedup();
        let mut stat_ns = self.stat_checkpoints.clone();
        stat_ns.sort_unstable();
        stat_ns.dedup();

        let needs_dense = self
            .tests
            .iter()
            .any(|t| matches!(t, TestSpec::DStatVsV { .. } | TestSpec::BStatVsU { .. }));
        if needs_dense && self.storage != StorageMode::Dense {
            return Err(field_err(
                "storage",
                "condition-diagnostic tests need \"dense\" storage",
            ));
        }

        let model = match &self.model {
            ModelSpec::TwoColor {
                initial_black,
                initial_red,
                black,
                red,
                pairing,
                moment_exponent,
            } => {
                let schedule = ReinforcementSchedule::new(
                    vec![black.build("model.black")?, red.build("model.red")?],
                    *pairing,
                    *moment_exponent,
                );
                let config = TwoColorConfig {
                    initial_black: *initial_black,
                    initial_red: *initial_red,
                    schedule,
                    horizon: self.horizon,
                    checkpoints: checkpoints.clone(),
                };
                config
                    .validate()
                    .map_err(|e| field_err("model", e.to_string()))?;
                ResolvedModel::TwoColor(config)
            }
            ModelSpec::Multicolor {
                initial_weights,
                colors,
                pairing,
                moment_exponent,
            } => {
                if colors.len() != initial_weights.len() {
                    return Err(field_err(
                        "model.colors",
                        format!(
                            "{} schedules for {} colors",
                            colors.len(),
                            initial_weights.len()
                        ),
                    ));
                }
                let schedule = ReinforcementSchedule::new(
                    colors
                        .iter()
                        .map(|c| c.build("model.colors"))
                        .collect::<Result<Vec<_>, _>>()?,
                    *pairing,
                    *moment_exponent,
                );
                let config = MultiColorConfig {
                    initial_weights: initial_weights.clone(),
                    schedule,
                    horizon: self.horizon,
                    checkpoints: checkpoints.clone(),
                };
                config
                    .validate()
                    .map_err(|e| field_err("model", e.to_string()))?;
                ResolvedModel::Multicolor(config)
            }
            ModelSpec::PoissonDirichlet {
                alpha,
                theta,
                base_measure,
                target,
            } => {
                let config = PdConfig {
                    alpha: *alpha,
                    theta: *theta,
                    base_measure: base_measure.clone(),
                    target: target.clone(),
                    horizon: self.horizon,
                    checkpoints: checkpoints.clone(),
                };
                config
                    .validate()
                    .map_err(|e| field_err("model", e.to_string()))?;
                ResolvedModel::PoissonDirichlet(config)
            }
        };

        if self.tracked_color >= model.num_colors().max(1) {
            return Err(field_err(
                "tracked_color",
                format!("out of range for {} colors", model.num_colors()),
            ));
        }

        Ok(ResolvedExperiment {
            model,
            replications: self.replications,
            stat_ns,
            options: SimOptions {
                storage: self.storage,
                tracked_color: self.tracked_color,
            },
            master_seed: self.master_seed,
            tests: self.tests.clone(),
            policy: ZProxyPolicy {
                min_horizon_ratio: self.min_proxy_ratio,
            },
            dump_trajectories: self.dump_trajectories,
        })
    }
}
