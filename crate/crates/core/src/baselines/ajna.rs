use serde::{Deserialize, Serialize};

use crate::error::IrmError;
use crate::numerics::{Decimal, Scalar};
use crate::pid::check_utilization;

/// Multiplicative rate nudged once per epoch toward a target utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AjnaConfig {
    pub target_utilization: Decimal,
    #[serde(default = "default_epoch")]
    pub epoch_seconds: u64,
    #[serde(default = "default_up")]
    pub up_factor: Decimal,
    #[serde(default = "default_down")]
    pub down_factor: Decimal,
    pub initial_rate: Decimal,
}

fn default_epoch() -> u64 {
    12 * 3600
}

fn default_up() -> Decimal {
    Decimal::from_raw(1_100_000_000_000_000_000)
}

fn default_down() -> Decimal {
    Decimal::from_raw(900_000_000_000_000_000)
}

impl AjnaConfig {
    pub fn new(target_utilization: Decimal, initial_rate: Decimal) -> Self {
        AjnaConfig {
            target_utilization,
            epoch_seconds: default_epoch(),
            up_factor: default_up(),
            down_factor: default_down(),
            initial_rate,
        }
    }

    pub fn validate(&self) -> Result<(), IrmError> {
        let bad = |m: String| Err(IrmError::InvalidConfig(m));
        if self.target_utilization <= Decimal::ZERO || self.target_utilization >= Decimal::ONE {
            return bad(format!("target_utilization {} must lie in (0, 1)", self.target_utilization));
        }
        if self.epoch_seconds == 0 {
            return bad("epoch_seconds must be positive".into());
        }
        if !self.up_factor.is_positive() || !self.down_factor.is_positive() {
            return bad("epoch factors must be positive".into());
        }
        if !self.initial_rate.is_positive() {
            return bad(format!("initial_rate {} must be positive", self.initial_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AjnaState<S = Decimal> {
    pub current_rate: S,
    pub last_epoch_boundary: u64,
    pub initialized: bool,
}

impl<S: Scalar> AjnaState<S> {
    pub fn uninitialized() -> Self {
        AjnaState { current_rate: S::zero(), last_epoch_boundary: 0, initialized: false }
    }

    pub fn to_decimal(&self) -> Result<AjnaState<Decimal>, IrmError> {
        Ok(AjnaState {
            current_rate: self.current_rate.to_decimal()?,
            last_epoch_boundary: self.last_epoch_boundary,
            initialized: self.initialized,
        })
    }
}

/// Applies one factor per epoch boundary crossed since the last boundary,
/// all judged against the utilization `u` observed now. The first call
/// starts the epoch clock at `now` with the configured initial rate.
pub fn ajna_step<S: Scalar>(
    config: &AjnaConfig,
    state: &AjnaState<S>,
    u: &S,
    now: u64,
) -> Result<AjnaState<S>, IrmError> {
    check_utilization(u)?;
    if !state.initialized {
        return Ok(AjnaState {
            current_rate: S::from_decimal(config.initial_rate),
            last_epoch_boundary: now,
            initialized: true,
        });
    }
    if now < state.last_epoch_boundary {
        return Err(IrmError::ClockRegression { last: state.last_epoch_boundary, now });
    }
    let epochs = (now - state.last_epoch_boundary) / config.epoch_seconds;
    let target = S::from_decimal(config.target_utilization);
    let factor = if *u > target {
        Some(S::from_decimal(config.up_factor))
    } else if *u < target {
        Some(S::from_decimal(config.down_factor))
    } else {
        None
    };
    let mut rate = state.current_rate.clone();
    if let Some(factor) = factor {
        for _ in 0..epochs {
            rate = rate.mul(&factor)?;
        }
    }
    Ok(AjnaState {
        current_rate: rate,
        last_epoch_boundary: state.last_epoch_boundary + epochs * config.epoch_seconds,
        initialized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn started(rate: &str) -> AjnaState {
        AjnaState { current_rate: d(rate), last_epoch_boundary: 0, initialized: true }
    }

    #[test]
    fn one_epoch_up_and_down() {
        let c = AjnaConfig::new(d("0.8"), d("0.05"));
        let s = ajna_step(&c, &started("0.05"), &d("0.9"), 43_200).unwrap();
        assert_eq!(s.current_rate, d("0.055"));
        assert_eq!(s.last_epoch_boundary, 43_200);
        let s = ajna_step(&c, &started("0.05"), &d("0.5"), 43_200).unwrap();
        assert_eq!(s.current_rate, d("0.045"));
    }

    #[test]
    fn at_target_rate_is_unchanged_but_clock_advances() {
        let c = AjnaConfig::new(d("0.8"), d("0.05"));
        let s = ajna_step(&c, &started("0.05"), &d("0.8"), 3 * 43_200 + 5).unwrap();
        assert_eq!(s.current_rate, d("0.05"));
        assert_eq!(s.last_epoch_boundary, 3 * 43_200);
    }

    #[test]
    fn partial_epoch_does_nothing() {
        let c = AjnaConfig::new(d("0.8"), d("0.05"));
        let s = ajna_step(&c, &started("0.05"), &d("0.95"), 43_199).unwrap();
        assert_eq!(s, started("0.05"));
    }

    #[test]
    fn first_call_initializes() {
        let c = AjnaConfig::new(d("0.8"), d("0.07"));
        let s = ajna_step(&c, &AjnaState::<Decimal>::uninitialized(), &d("0.9"), 1000).unwrap();
        assert_eq!(s, AjnaState { current_rate: d("0.07"), last_epoch_boundary: 1000, initialized: true });
    }

    #[test]
    fn clock_regression() {
        let c = AjnaConfig::new(d("0.8"), d("0.05"));
        let s = AjnaState { last_epoch_boundary: 100, ..started("0.05") };
        assert!(matches!(ajna_step(&c, &s, &d("0.9"), 50), Err(IrmError::ClockRegression { .. })));
    }

    #[test]
    fn config_defaults_from_json() {
        let c: AjnaConfig =
            serde_json::from_str(r#"{"target_utilization":"0.8","initial_rate":"0.05"}"#).unwrap();
        assert_eq!(c, AjnaConfig::new(d("0.8"), d("0.05")));
        assert!(c.validate().is_ok());
    }
}
