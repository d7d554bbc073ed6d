use serde::Serialize;

use crate::numerics::Decimal;

use super::{EngineError, SimTrace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyMetrics {
    pub name: String,
    pub max_rate: Decimal,
    pub final_rate: Decimal,
    /// First step at which utilization reaches its maximum.
    pub inflection_step: u32,
    pub rate_at_inflection: Decimal,
    /// Largest rate from the inflection onward divided by the rate at the
    /// inflection; absent when that rate is zero.
    pub overshoot: Option<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub steps: usize,
    pub target: Decimal,
    pub band: Decimal,
    /// Steps before utilization enters and stays within `band` of `target`;
    /// `steps + 1` when the trace ends outside the band.
    pub settling_time: usize,
    pub settled: bool,
    /// Steps with utilization strictly above `target`.
    pub time_above_target: usize,
    pub strategies: Vec<StrategyMetrics>,
}

pub fn compute_metrics(trace: &SimTrace, target: Decimal, band: Decimal) -> Result<Metrics, EngineError> {
    if trace.is_empty() {
        return Err(EngineError::EmptyTrace);
    }
    let outside = |u: Decimal| -> Result<bool, EngineError> { Ok(u.checked_sub(target)?.abs() >= band) };
    let mut last_outside = None;
    for (i, row) in trace.rows.iter().enumerate() {
        if outside(row.utilization)? {
            last_outside = Some(i);
        }
    }
    let n = trace.len();
    let (settling_time, settled) = match last_outside {
        None => (0, true),
        Some(i) if i + 1 == n => (n + 1, false),
        Some(i) => (i + 1, true),
    };

    let peak = trace.rows.iter().map(|r| r.utilization).max().expect("non-empty");
    let inflection = trace.rows.iter().position(|r| r.utilization == peak).expect("peak exists");

    let mut strategies = Vec::with_capacity(trace.strategies.len());
    for (idx, col) in trace.strategies.iter().enumerate() {
        let rates: Vec<Decimal> = trace.rows.iter().map(|r| r.cells[idx].rate).collect();
        let at = rates[inflection];
        let after = rates[inflection..].iter().copied().max().expect("non-empty");
        let overshoot = if at.is_zero() { None } else { Some(after.checked_div(at)?) };
        strategies.push(StrategyMetrics {
            name: col.name.clone(),
            max_rate: rates.iter().copied().max().expect("non-empty"),
            final_rate: *rates.last().expect("non-empty"),
            inflection_step: trace.rows[inflection].step,
            rate_at_inflection: at,
            overshoot,
        });
    }
    Ok(Metrics {
        steps: n,
        target,
        band,
        settling_time,
        settled,
        time_above_target: trace.time_above(target),
        strategies,
    })
}
