//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::numerics::{Backend, Decimal};
use crate::scenario::ScenarioSpec;
use crate::strategy::{IrmKind, Strategy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PathBuf>,
}

fn default_band() -> Decimal {
    Decimal::from_raw(20_000_000_000_000_000) // 0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub strategies: Vec<Strategy>,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub backend: Backend,
    /// Settling band around the metrics target, in absolute utilization.
    #[serde(default = "default_band")]
    pub band: Decimal,
    /// Utilization set-point used by the metrics. Defaults to the first PID
    /// strategy's optimum, then the first Ajna/Morpho target, then 0.5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Decimal>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&read_text(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.strategies.is_empty() {
            return Err(ConfigError::Invalid("at least one strategy is required".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            s.validate().map_err(|e| ConfigError::Invalid(format!("strategy {:?}: {e}", s.name)))?;
            if self.strategies[..i].iter().any(|o| o.name == s.name) {
                return Err(ConfigError::Invalid(format!("duplicate strategy name {:?}", s.name)));
            }
        }
        self.scenario.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.scenario.feedback.is_some() && self.strategies.len() != 1 {
            return Err(ConfigError::Invalid(format!(
                "closed-loop scenarios take exactly one strategy, got {}",
                self.strategies.len()
            )));
        }
        if self.band.is_negative() {
            return Err(ConfigError::Invalid(format!("band {} must be non-negative", self.band)));
        }
        if let Some(t) = self.target {
            if t.is_negative() || t > Decimal::ONE {
                return Err(ConfigError::Invalid(format!("target {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn metrics_target(&self) -> Decimal {
        if let Some(t) = self.target {
            return t;
        }
        let pid = self.strategies.iter().find_map(|s| match &s.model {
            IrmKind::Pid(c) => Some(c.u_optimal),
            _ => None,
        });
        let other = || {
            self.strategies.iter().find_map(|s| match &s.model {
                IrmKind::Ajna(c) => Some(c.target_utilization),
                IrmKind::Morpho(c) => Some(c.u_target),
                _ => None,
            })
        };
        pid.or_else(other).unwrap_or(Decimal::HALF)
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ConfigError::NotFound(path.to_path_buf()),
        _ => ConfigError::Io { path: path.to_path_buf(), message: e.to_string() },
    })
}
