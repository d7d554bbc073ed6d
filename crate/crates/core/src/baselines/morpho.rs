//! Adaptive-curve model: a rate-at-target that drifts exponentially with the
//! utilization error, scaled by a piecewise-linear curve `xi(u)`.
//!
//! Per step of length `dt` the log rate moves by
//! `k_p * err(u_prev) * dt + ln xi(u) - ln xi(u_prev)`. The first term is an
//! explicit-Euler step on the rate at target (exact for constant error, since
//! it is applied through `exp`); the second is the curve-following term
//! integrated exactly.

use serde::{Deserialize, Serialize};

use crate::error::IrmError;
use crate::numerics::{Decimal, Scalar};
use crate::pid::normalize_error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphoConfig {
    /// Speed of the rate-at-target drift, per second per unit of error.
    pub k_p: Decimal,
    pub u_target: Decimal,
    /// Curve multiplier at zero utilization, in `(0, 1]`.
    pub curve_low: Decimal,
    /// Curve multiplier at full utilization, at least 1.
    pub curve_high: Decimal,
    pub initial_rate_at_target: Decimal,
}

impl MorphoConfig {
    pub fn validate(&self) -> Result<(), IrmError> {
        let bad = |m: String| Err(IrmError::InvalidConfig(m));
        if self.k_p.is_negative() {
            return bad(format!("k_p {} must be non-negative", self.k_p));
        }
        if self.u_target <= Decimal::ZERO || self.u_target >= Decimal::ONE {
            return bad(format!("u_target {} must lie in (0, 1)", self.u_target));
        }
        if !self.curve_low.is_positive() || self.curve_low > Decimal::ONE {
            return bad(format!("curve_low {} must lie in (0, 1]", self.curve_low));
        }
        if self.curve_high < Decimal::ONE {
            return bad(format!("curve_high {} must be at least 1", self.curve_high));
        }
        if !self.initial_rate_at_target.is_positive() {
            return bad("initial_rate_at_target must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphoState<S = Decimal> {
    pub rate_at_target: S,
    pub last_update: u64,
    pub last_u: S,
    pub initialized: bool,
}

impl<S: Scalar> MorphoState<S> {
    pub fn uninitialized() -> Self {
        MorphoState { rate_at_target: S::zero(), last_update: 0, last_u: S::zero(), initialized: false }
    }

    pub fn to_decimal(&self) -> Result<MorphoState<Decimal>, IrmError> {
        Ok(MorphoState {
            rate_at_target: self.rate_at_target.to_decimal()?,
            last_update: self.last_update,
            last_u: self.last_u.to_decimal()?,
            initialized: self.initialized,
        })
    }
}

/// Curve multiplier: `curve_low` at `u = 0`, 1 at target, `curve_high` at `u = 1`.
pub fn curve<S: Scalar>(config: &MorphoConfig, u: &S) -> Result<S, IrmError> {
    let err = normalize_error(u, &S::from_decimal(config.u_target))?;
    let slope = if err.is_negative() {
        S::one().sub(&S::from_decimal(config.curve_low))?
    } else {
        S::from_decimal(config.curve_high).sub(&S::one())?
    };
    Ok(S::one().add(&slope.mul(&err)?)?)
}

/// Returns the new state and the borrow rate `rate_at_target * xi(u)`.
pub fn morpho_step<S: Scalar>(
    config: &MorphoConfig,
    state: &MorphoState<S>,
    u: &S,
    now: u64,
) -> Result<(MorphoState<S>, S), IrmError> {
    let xi = curve(config, u)?;
    if !state.initialized {
        let rate_at_target = S::from_decimal(config.initial_rate_at_target);
        let rate = rate_at_target.mul(&xi)?;
        let next = MorphoState { rate_at_target, last_update: now, last_u: u.clone(), initialized: true };
        return Ok((next, rate));
    }
    if now < state.last_update {
        return Err(IrmError::ClockRegression { last: state.last_update, now });
    }
    let elapsed = S::from_int((now - state.last_update) as i64);
    let err = normalize_error(&state.last_u, &S::from_decimal(config.u_target))?;
    let speed = S::from_decimal(config.k_p).mul(&err)?.mul(&elapsed)?;
    let rate_at_target = if speed == S::zero() {
        state.rate_at_target.clone()
    } else {
        state.rate_at_target.mul(&speed.exp()?)?
    };
    let rate = rate_at_target.mul(&xi)?;
    Ok((MorphoState { rate_at_target, last_update: now, last_u: u.clone(), initialized: true }, rate))
}
