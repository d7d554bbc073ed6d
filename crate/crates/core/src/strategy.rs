//! Uniform interface over the four rate models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    aave_rate, ajna_step, morpho_step, AaveConfig, AjnaConfig, AjnaState, MorphoConfig,
    MorphoState,
};
use crate::error::IrmError;
use crate::numerics::{Decimal, Scalar};
use crate::pid::{update_and_rate, ControllerBreakdown, PidConfig, PidState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IrmKind {
    Pid(PidConfig),
    Aave(AaveConfig),
    Ajna(AjnaConfig),
    Morpho(MorphoConfig),
}

impl IrmKind {
    pub fn validate(&self) -> Result<(), IrmError> {
        match self {
            IrmKind::Pid(c) => c.validate(),
            IrmKind::Aave(c) => c.validate(),
            IrmKind::Ajna(c) => c.validate(),
            IrmKind::Morpho(c) => c.validate(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            IrmKind::Pid(_) => "pid",
            IrmKind::Aave(_) => "aave",
            IrmKind::Ajna(_) => "ajna",
            IrmKind::Morpho(_) => "morpho",
        }
    }
}

/// A rate model with the column prefix it writes to traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategy {
    pub name: String,
    pub model: IrmKind,
}

impl Strategy {
    pub fn new(name: impl Into<String>, model: IrmKind) -> Self {
        Strategy { name: name.into(), model }
    }

    pub fn validate(&self) -> Result<(), IrmError> {
        if self.name.is_empty() || self.name.contains([',', '.', '"', '\n']) {
            return Err(IrmError::InvalidConfig(format!(
                "strategy name {:?} must be non-empty and free of ',', '.', quotes and newlines",
                self.name
            )));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyState<S> {
    Pid(PidState<S>),
    /// Stateless; the last utilization seen is kept only for snapshots.
    Aave,
    Ajna(AjnaState<S>),
    Morpho(MorphoState<S>),
}

/// Result of advancing one strategy by one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<S> {
    pub rate: S,
    pub breakdown: Option<ControllerBreakdown<S>>,
}

/// Flat key/value view of a model state: decimals in canonical form,
/// timestamps and flags as plain integers / booleans.
pub type StateSnapshot = BTreeMap<String, serde_json::Value>;

impl<S: Scalar> StrategyState<S> {
    pub fn initial(kind: &IrmKind) -> Self {
        match kind {
            IrmKind::Pid(_) => StrategyState::Pid(PidState::default()),
            IrmKind::Aave(_) => StrategyState::Aave,
            IrmKind::Ajna(_) => StrategyState::Ajna(AjnaState::uninitialized()),
            IrmKind::Morpho(_) => StrategyState::Morpho(MorphoState::uninitialized()),
        }
    }

    /// Feeds utilization `u` observed at `now`, returning the next state and the rate.
    pub fn step(&self, kind: &IrmKind, u: &S, now: u64) -> Result<(Self, StepOutput<S>), IrmError> {
        match (kind, self) {
            (IrmKind::Pid(cfg), StrategyState::Pid(state)) => {
                let (next, breakdown) = update_and_rate(cfg, state, u, now)?;
                let rate = breakdown.rate.clone();
                Ok((StrategyState::Pid(next), StepOutput { rate, breakdown: Some(breakdown) }))
            }
            (IrmKind::Aave(cfg), StrategyState::Aave) => {
                let rate = aave_rate(cfg, u)?;
                Ok((StrategyState::Aave, StepOutput { rate, breakdown: None }))
            }
            (IrmKind::Ajna(cfg), StrategyState::Ajna(state)) => {
                let next = ajna_step(cfg, state, u, now)?;
                let rate = next.current_rate.clone();
                Ok((StrategyState::Ajna(next), StepOutput { rate, breakdown: None }))
            }
            (IrmKind::Morpho(cfg), StrategyState::Morpho(state)) => {
                let (next, rate) = morpho_step(cfg, state, u, now)?;
                Ok((StrategyState::Morpho(next), StepOutput { rate, breakdown: None }))
            }
            (kind, _) => Err(IrmError::InvalidConfig(format!(
                "state does not belong to a {} model",
                kind.label()
            ))),
        }
    }

    pub fn snapshot(&self) -> Result<StateSnapshot, IrmError> {
        let value = match self {
            StrategyState::Pid(s) => serde_json::to_value(s.to_decimal()?),
            StrategyState::Aave => Ok(serde_json::Value::Object(Default::default())),
            StrategyState::Ajna(s) => serde_json::to_value(s.to_decimal()?),
            StrategyState::Morpho(s) => serde_json::to_value(s.to_decimal()?),
        }
        .map_err(|e| IrmError::InvalidConfig(e.to_string()))?;
        Ok(match value {
            serde_json::Value::Object(map) => map.into_iter().collect(),
            _ => StateSnapshot::new(),
        })
    }
}

impl StrategyState<Decimal> {
    /// Rebuilds a fixed-point state from a [`StrategyState::snapshot`] record.
    pub fn restore(kind: &IrmKind, snapshot: &StateSnapshot) -> Result<Self, IrmError> {
        let value = serde_json::Value::Object(snapshot.clone().into_iter().collect());
        let err = |e: serde_json::Error| IrmError::InvalidConfig(format!("bad snapshot: {e}"));
        Ok(match kind {
            IrmKind::Pid(_) => StrategyState::Pid(serde_json::from_value(value).map_err(err)?),
            IrmKind::Aave(_) => StrategyState::Aave,
            IrmKind::Ajna(_) => StrategyState::Ajna(serde_json::from_value(value).map_err(err)?),
            IrmKind::Morpho(_) => StrategyState::Morpho(serde_json::from_value(value).map_err(err)?),
        })
    }
}
