use crate::numerics::{Decimal, NumericError};

/// Errors raised by the rate models.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IrmError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("utilization {0} outside [0, 1]")]
    UtilizationOutOfRange(Decimal),
    #[error("clock regression: update at t={now} precedes last update at t={last}")]
    ClockRegression { last: u64, now: u64 },
    #[error("infeasible anchor: baseline rate {rate} must lie strictly between 0 and m = {m}")]
    InfeasibleAnchor { rate: Decimal, m: Decimal },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
