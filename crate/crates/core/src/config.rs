//! JSON application config: one document with a section per component.
//!
//! ```json
//! {
//!   "scenario": { "rng_seed": 7, "n_frames": 30, "noise_sigma": 0.5 },
//!   "loss":     { "percentile_i": 80 },
//!   "fda":      { "eval_budget": 20000 },
//!   "detector": { "relative_jump": 3.0 },
//!   "runner":   { "warm_start_policy": "warm" }
//! }
//! ```
//!
//! Every section and field is optional and falls back to its default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamic::{default_dof_bounds, ChangeDetectorConfig, RunnerConfig, RunnerError, WarmStartPolicy};
use crate::fda::{FdaConfig, FdaError, SearchSpace};
use crate::loss::{LossError, TrimmedLossConfig};
use crate::synth::ScenarioConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerSection {
    pub dof_bounds: SearchSpace,
    pub warm_start_policy: WarmStartPolicy,
}

impl Default for RunnerSection {
    fn default() -> Self {
        Self {
            dof_bounds: default_dof_bounds(),
            warm_start_policy: WarmStartPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub scenario: ScenarioConfig,
    pub loss: TrimmedLossConfig,
    pub fda: FdaConfig,
    pub detector: ChangeDetectorConfig,
    pub runner: RunnerSection,
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: AppConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides both the scenario and optimizer seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.rng_seed = seed;
        self.fda.rng_seed = seed;
        self
    }

    pub fn runner_config(&self) -> RunnerConfig {
        RunnerConfig {
            dof_bounds: self.runner.dof_bounds.clone(),
            loss: self.loss,
            fda: self.fda.clone(),
            detector: self.detector,
            warm_start_policy: self.runner.warm_start_policy,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario
            .validate()
            .map_err(|e| invalid(&format!("scenario.{}", e.field), e.reason))?;
        match self.runner_config().validate() {
            Ok(()) => Ok(()),
            Err(RunnerError::Loss(e)) => Err(match e {
                LossError::InvalidPenalty(_) => invalid("loss.degenerate_penalty", e),
                _ => invalid("loss.percentile_i", e),
            }),
            Err(RunnerError::Optimizer(FdaError::InvalidConfig(msg))) => {
                let field = msg.split_whitespace().next().unwrap_or("").to_string();
                Err(invalid(&format!("fda.{field}"), msg))
            }
            Err(RunnerError::ConfigInvalid(msg)) => {
                let field = if msg.starts_with("detector.") {
                    msg.split_whitespace().next().unwrap_or("detector").to_string()
                } else {
                    "runner.dof_bounds".to_string()
                };
                Err(invalid(&field, msg))
            }
            Err(e) => Err(invalid("runner", e)),
        }
    }
}
