use serde::{Deserialize, Serialize};

use crate::error::IrmError;
use crate::numerics::{Decimal, Scalar};
use crate::pid::check_utilization;

/// Two-slope piecewise-linear rate curve with a kink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaveConfig {
    pub base_rate: Decimal,
    /// Rate added between zero utilization and the kink.
    pub slope1: Decimal,
    /// Rate added between the kink and full utilization.
    pub slope2: Decimal,
    pub u_kink: Decimal,
}

impl AaveConfig {
    pub fn validate(&self) -> Result<(), IrmError> {
        for (name, v) in [("base_rate", self.base_rate), ("slope1", self.slope1), ("slope2", self.slope2)] {
            if v.is_negative() {
                return Err(IrmError::InvalidConfig(format!("{name} {v} must be non-negative")));
            }
        }
        if self.u_kink <= Decimal::ZERO || self.u_kink >= Decimal::ONE {
            return Err(IrmError::InvalidConfig(format!("u_kink {} must lie in (0, 1)", self.u_kink)));
        }
        Ok(())
    }
}

pub fn aave_rate<S: Scalar>(config: &AaveConfig, u: &S) -> Result<S, IrmError> {
    check_utilization(u)?;
    let kink = S::from_decimal(config.u_kink);
    let base = S::from_decimal(config.base_rate);
    let slope1 = S::from_decimal(config.slope1);
    if *u <= kink {
        // Dividing first makes u = kink land exactly on base + slope1.
        return Ok(base.add(&slope1.mul(&u.div(&kink)?)?)?);
    }
    let excess = u.sub(&kink)?.div(&S::one().sub(&kink)?)?;
    Ok(base.add(&slope1)?.add(&S::from_decimal(config.slope2).mul(&excess)?)?)
}
