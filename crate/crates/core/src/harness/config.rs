//! Run configuration: TOML with defaults for every key; unknown keys are
//! rejected and every value is range-checked.

use crate::decision::CredibilityParams;
use crate::memory::MemoryParams;
use crate::model::{LearningType, MemoryModel};
use crate::policy::imitation::ImitationParams;
use crate::policy::qlearning::QParams;
use crate::policy::scripted::Ruleset;
use crate::world::orders::GeneratorParams;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("config value out of range: {key}: {msg}")]
    Range { key: String, msg: String },
}

fn range(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Range { key: key.to_string(), msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentParams {
    pub speed: f64,
    pub scope: f64,
    pub survival_cost: f64,
    pub active_steps_per_day: u32,
    pub max_daily_changes: u8,
    pub rest_steps: u32,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            speed: 10.0,
            scope: 100.0,
            survival_cost: 10.0,
            active_steps_per_day: 120,
            max_daily_changes: 2,
            rest_steps: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvParams {
    /// Per-step probability that a new congestion block appears.
    pub congestion_prob: f64,
    pub congestion_min_side: u32,
    pub congestion_max_side: u32,
    pub congestion_min_steps: u32,
    pub congestion_max_steps: u32,
    pub weather: bool,
    /// Daily probability of clear turning to rain.
    pub rain_start_prob: f64,
    /// Daily probability of rain clearing.
    pub rain_stop_prob: f64,
    pub rain_speed_factor: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            congestion_prob: 0.05,
            congestion_min_side: 5,
            congestion_max_side: 40,
            congestion_min_steps: 5,
            congestion_max_steps: 30,
            weather: false,
            rain_start_prob: 0.2,
            rain_stop_prob: 0.5,
            rain_speed_factor: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    pub dir: String,
    pub decision_log: bool,
    pub memory_snapshot: bool,
    pub learning_snapshot: bool,
    /// Write a world snapshot every this many days; 0 disables.
    pub world_snapshot_days: u32,
    /// Re-execute every action from its start state and count mismatches.
    pub check_triples: bool,
}

impl Default for OutputParams {
    fn default() -> Self {
        OutputParams {
            dir: "out".to_string(),
            decision_log: false,
            memory_snapshot: false,
            learning_snapshot: false,
            world_snapshot_days: 0,
            check_triples: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_agents: u32,
    pub steps: u64,
    pub steps_per_day: u32,
    pub width: u32,
    pub height: u32,
    pub learning: LearningType,
    /// When non-empty, agent `i` uses `learning_mix[i % len]`.
    pub learning_mix: Vec<LearningType>,
    pub memory_model: MemoryModel,
    pub agent: AgentParams,
    pub memory: MemoryParams,
    pub credibility: CredibilityParams,
    pub generator: GeneratorParams,
    pub imitation: ImitationParams,
    pub qlearning: QParams,
    pub script: Ruleset,
    pub environment: EnvParams,
    pub output: OutputParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            n_agents: 400,
            steps: 21_600,
            steps_per_day: 360,
            width: 786,
            height: 890,
            learning: LearningType::Rule,
            learning_mix: Vec::new(),
            memory_model: MemoryModel::None,
            agent: AgentParams::default(),
            memory: MemoryParams::default(),
            credibility: CredibilityParams::default(),
            generator: GeneratorParams::default(),
            imitation: ImitationParams::default(),
            qlearning: QParams::default(),
            script: Ruleset::default(),
            environment: EnvParams::default(),
            output: OutputParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Laptop-sized profile: 50 agents over 10 days.
    pub fn desk() -> Self {
        ExperimentConfig { n_agents: 50, steps: 3600, ..ExperimentConfig::default() }
    }

    pub fn days(&self) -> u64 {
        self.steps / self.steps_per_day as u64
    }

    pub fn learning_of(&self, agent: u32) -> LearningType {
        if self.learning_mix.is_empty() {
            self.learning
        } else {
            self.learning_mix[agent as usize % self.learning_mix.len()]
        }
    }

    /// Propagates shared settings into the parameter blocks.
    pub fn resolve(mut self) -> Self {
        self.memory.steps_per_day = self.steps_per_day;
        self.credibility.steps_per_day = self.steps_per_day;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(range(key, format!("{v} not in [0, 1]")))
            }
        };
        let open_unit = |key: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(range(key, format!("{v} not in (0, 1)")))
            }
        };
        if self.steps_per_day == 0 {
            return Err(range("steps_per_day", "must be positive"));
        }
        if self.steps % self.steps_per_day as u64 != 0 {
            return Err(range("steps", format!("{} is not a whole number of days", self.steps)));
        }
        if self.width < 2 || self.height < 2 {
            return Err(range("width", "map must be at least 2x2"));
        }
        let a = &self.agent;
        if !(a.speed > std::f64::consts::SQRT_2) {
            return Err(range("agent.speed", "must exceed sqrt(2)"));
        }
        if !(a.scope > 0.0) {
            return Err(range("agent.scope", "must be positive"));
        }
        if !(a.survival_cost >= 0.0) {
            return Err(range("agent.survival_cost", "must be non-negative"));
        }
        if a.active_steps_per_day == 0 || a.active_steps_per_day > self.steps_per_day {
            return Err(range("agent.active_steps_per_day", "must be in 1..=steps_per_day"));
        }
        let m = &self.memory;
        if !(m.gamma > 0.0 && m.gamma <= 1.0) {
            return Err(range("memory.gamma", "must be in (0, 1]"));
        }
        if !(m.theta_value >= 0.0) {
            return Err(range("memory.theta_value", "must be non-negative"));
        }
        unit("memory.theta_rare", m.theta_rare)?;
        if m.k == 0 {
            return Err(range("memory.k", "must be positive"));
        }
        open_unit("memory.lambda", m.lambda)?;
        open_unit("memory.discard_floor", m.discard_floor)?;
        let c = &self.credibility;
        for (k, v) in [("credibility.w1", c.w1), ("credibility.w2", c.w2), ("credibility.w3", c.w3)] {
            unit(k, v)?;
        }
        if (c.w1 + c.w2 + c.w3 - 1.0).abs() > 1e-9 {
            return Err(range("credibility.w1", "weights w1 + w2 + w3 must sum to 1"));
        }
        open_unit("credibility.lambda", c.lambda)?;
        unit("credibility.theta_memory", c.theta_memory)?;
        let g = &self.generator;
        if g.c.iter().any(|c| !(*c > 0.0)) {
            return Err(range("generator.c", "every width must be positive"));
        }
        if !(g.alpha >= 0.0) {
            return Err(range("generator.alpha", "must be non-negative"));
        }
        unit("imitation.min_similarity", self.imitation.min_similarity)?;
        let q = &self.qlearning;
        open_unit("qlearning.alpha", q.alpha)?;
        open_unit("qlearning.gamma", q.gamma)?;
        unit("qlearning.epsilon_start", q.epsilon_start)?;
        unit("qlearning.epsilon_end", q.epsilon_end)?;
        unit("qlearning.anneal_fraction", q.anneal_fraction)?;
        self.script.validate().map_err(|e| range("script.accept_min_density", e))?;
        let e = &self.environment;
        unit("environment.congestion_prob", e.congestion_prob)?;
        unit("environment.rain_start_prob", e.rain_start_prob)?;
        unit("environment.rain_stop_prob", e.rain_stop_prob)?;
        if !(e.rain_speed_factor > 0.0 && e.rain_speed_factor <= 1.0) {
            return Err(range("environment.rain_speed_factor", "must be in (0, 1]"));
        }
        if e.congestion_min_side == 0 || e.congestion_min_side > e.congestion_max_side {
            return Err(range("environment.congestion_min_side", "need 1 <= min_side <= max_side"));
        }
        if e.congestion_min_steps == 0 || e.congestion_min_steps > e.congestion_max_steps {
            return Err(range("environment.congestion_min_steps", "need 1 <= min_steps <= max_steps"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let cfg = cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!((c.width, c.height, c.n_agents, c.steps), (786, 890, 400, 21600));
        assert_eq!(c.memory.k, 4000);
        assert_eq!(c.credibility.theta_memory, 0.7);
    }

    #[test]
    fn explicit_table_values_echo() {
        let c = parse_config("width = 786\nheight = 890\nn_agents = 400\nsteps = 21600\n").unwrap();
        let echo = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, echo);
        assert_eq!((echo.width, echo.height, echo.n_agents, echo.steps), (786, 890, 400, 21600));
    }

    #[test]
    fn theta_memory_range_error() {
        let e = parse_config("[credibility]\ntheta_memory = 1.5\n").unwrap_err();
        assert!(matches!(&e, ConfigError::Range { key, .. } if key.ends_with("theta_memory")));
        assert!(e.to_string().contains("theta_memory"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse_config("bogus = 1\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("[memory]\nsteps_per_day = 5\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn partial_days_rejected() {
        let e = parse_config("steps = 100\n").unwrap_err();
        assert!(matches!(e, ConfigError::Range { key, .. } if key == "steps"));
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(parse_config("[credibility]\nw1 = 0.5\n").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_config(Path::new("/nonexistent/x.toml")), Err(ConfigError::Io { .. })));
    }
}
