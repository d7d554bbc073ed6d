//! Drives rate models over a scenario and records what they did.
//!
//! Open-loop runs feed every strategy the same utilization path and may
//! evaluate strategies in parallel; they never interact. Closed-loop runs
//! (scenario with a feedback model) take exactly one strategy, whose rates
//! push utilization around through the delayed response.

mod metrics;
mod trace;

use std::path::Path;

use rayon::prelude::*;

pub use metrics::{compute_metrics, Metrics, StrategyMetrics};
pub use trace::{Cell, SimTrace, TraceColumn, TraceRow, BREAKDOWN_FIELDS};

use crate::error::IrmError;
use crate::numerics::{within_relative, Backend, Decimal, NumericError, Reference, Scalar};
use crate::scenario::{feedback_next, Sample, ScenarioError, ScenarioSpec};
use crate::strategy::{StateSnapshot, Strategy, StrategyState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("strategy {strategy:?} failed at step {step}: {source}")]
    Step { strategy: String, step: u32, source: IrmError },
    #[error("invalid strategy {strategy:?}: {source}")]
    Strategy { strategy: String, source: IrmError },
    #[error("at least one strategy is required")]
    NoStrategies,
    #[error("duplicate strategy name {0:?}")]
    DuplicateName(String),
    #[error("closed-loop runs take exactly one strategy, got {0}")]
    ClosedLoopArity(usize),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("trace strategies {found:?} do not match configured strategies {expected:?}")]
    StrategyMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("regression at step {step}, column {column}: recorded {recorded}, replayed {replayed}")]
    Regression { step: u32, column: String, recorded: Decimal, replayed: Decimal },
}

fn check_strategies(strategies: &[Strategy]) -> Result<(), EngineError> {
    if strategies.is_empty() {
        return Err(EngineError::NoStrategies);
    }
    for (i, s) in strategies.iter().enumerate() {
        s.validate()
            .map_err(|source| EngineError::Strategy { strategy: s.name.clone(), source })?;
        if strategies[..i].iter().any(|o| o.name == s.name) {
            return Err(EngineError::DuplicateName(s.name.clone()));
        }
    }
    Ok(())
}

/// Runs `strategies` over `spec` on the chosen arithmetic.
pub fn run(strategies: &[Strategy], spec: &ScenarioSpec, backend: Backend) -> Result<SimTrace, EngineError> {
    match backend {
        Backend::Fixed => run_on::<Decimal>(strategies, spec),
        Backend::Reference => run_on::<Reference>(strategies, spec),
    }
}

pub fn run_on<S: Scalar>(strategies: &[Strategy], spec: &ScenarioSpec) -> Result<SimTrace, EngineError> {
    check_strategies(strategies)?;
    spec.validate()?;
    if spec.feedback.is_some() {
        return match strategies {
            [only] => run_closed_loop::<S>(only, spec),
            _ => Err(EngineError::ClosedLoopArity(strategies.len())),
        };
    }
    let samples = spec.generate()?;
    drive_all::<S>(strategies, &samples)
}

/// Replays `samples` through every strategy independently.
pub fn drive_all<S: Scalar>(strategies: &[Strategy], samples: &[Sample]) -> Result<SimTrace, EngineError> {
    let columns: Vec<(Vec<Cell>, StateSnapshot)> = strategies
        .par_iter()
        .map(|s| drive::<S>(s, samples))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<TraceRow> = samples
        .iter()
        .map(|s| TraceRow {
            step: s.step,
            timestamp: s.timestamp,
            utilization: s.utilization,
            cells: Vec::with_capacity(strategies.len()),
        })
        .collect();
    let mut final_states = Vec::with_capacity(strategies.len());
    for (cells, snapshot) in columns {
        for (row, cell) in rows.iter_mut().zip(cells) {
            row.cells.push(cell);
        }
        final_states.push(snapshot);
    }
    Ok(SimTrace { strategies: trace_columns(strategies), rows, final_states })
}

fn trace_columns(strategies: &[Strategy]) -> Vec<TraceColumn> {
    strategies
        .iter()
        .map(|s| TraceColumn {
            name: s.name.clone(),
            has_breakdown: matches!(s.model, crate::strategy::IrmKind::Pid(_)),
        })
        .collect()
}

struct Driver<'a, S> {
    strategy: &'a Strategy,
    state: StrategyState<S>,
}

impl<'a, S: Scalar> Driver<'a, S> {
    fn new(strategy: &'a Strategy) -> Self {
        Driver { strategy, state: StrategyState::initial(&strategy.model) }
    }

    fn observe(&mut self, step: u32, timestamp: u64, u: Decimal) -> Result<Cell, EngineError> {
        let at_step = |source: IrmError| EngineError::Step { strategy: self.strategy.name.clone(), step, source };
        let (next, out) = self
            .state
            .step(&self.strategy.model, &S::from_decimal(u), timestamp)
            .map_err(at_step)?;
        self.state = next;
        let rate = out.rate.to_decimal().map_err(|e| at_step(e.into()))?;
        let breakdown = out
            .breakdown
            .map(|b| b.to_decimal())
            .transpose()
            .map_err(at_step)?;
        Ok(Cell { rate, breakdown })
    }

    fn snapshot(&self) -> Result<StateSnapshot, EngineError> {
        self.state.snapshot().map_err(|source| EngineError::Strategy {
            strategy: self.strategy.name.clone(),
            source,
        })
    }
}

fn drive<S: Scalar>(strategy: &Strategy, samples: &[Sample]) -> Result<(Vec<Cell>, StateSnapshot), EngineError> {
    let mut driver = Driver::<S>::new(strategy);
    let cells = samples
        .iter()
        .map(|s| driver.observe(s.step, s.timestamp, s.utilization))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((cells, driver.snapshot()?))
}

/// Closed loop: step 1 takes the scenario's first utilization; afterwards
/// `u_t = feedback_next(u_{t-1}, rate_{t-delay}, noise_t + (s_t - s_{t-1}))`
/// where `s` is the open-loop scenario path acting as an exogenous shock and
/// rates before step 1 are taken to equal the reference rate.
fn run_closed_loop<S: Scalar>(strategy: &Strategy, spec: &ScenarioSpec) -> Result<SimTrace, EngineError> {
    let feedback = spec.feedback.as_ref().expect("closed loop requires a feedback model");
    let path = spec.generate()?;
    let mut noise = spec.noise_source();
    let mut driver = Driver::<S>::new(strategy);
    let delay = feedback.delay as usize;
    let mut rows: Vec<TraceRow> = Vec::with_capacity(path.len());
    for (idx, sample) in path.iter().enumerate() {
        let u = match rows.last() {
            None => sample.utilization,
            Some(prev) => {
                let rate_delayed = if idx >= delay { rows[idx - delay].cells[0].rate } else { feedback.reference_rate };
                let shock = sample.utilization.checked_sub(path[idx - 1].utilization)?;
                let disturbance = noise.draw(feedback.noise_volatility)?.checked_add(shock)?;
                feedback_next(feedback, prev.utilization, rate_delayed, disturbance)?
            }
        };
        let cell = driver.observe(sample.step, sample.timestamp, u)?;
        rows.push(TraceRow { step: sample.step, timestamp: sample.timestamp, utilization: u, cells: vec![cell] });
    }
    Ok(SimTrace {
        strategies: trace_columns(std::slice::from_ref(strategy)),
        rows,
        final_states: vec![driver.snapshot()?],
    })
}

/// Re-executes a recorded trace and checks every recorded cell.
///
/// The recorded utilization path is fed back open-loop, so closed-loop traces
/// replay too. On the fixed backend every cell must match bit for bit; on the
/// reference backend rates and breakdown fields must agree within `1e-6`
/// relative. Returns the freshly computed trace.
pub fn replay(recorded: &SimTrace, strategies: &[Strategy], backend: Backend) -> Result<SimTrace, EngineError> {
    if recorded.is_empty() {
        return Err(EngineError::EmptyTrace);
    }
    let expected: Vec<String> = strategies.iter().map(|s| s.name.clone()).collect();
    let found: Vec<String> = recorded.strategies.iter().map(|c| c.name.clone()).collect();
    if expected != found {
        return Err(EngineError::StrategyMismatch { expected, found });
    }
    check_strategies(strategies)?;
    let samples: Vec<Sample> = recorded
        .rows
        .iter()
        .map(|r| Sample { step: r.step, timestamp: r.timestamp, utilization: r.utilization })
        .collect();
    let fresh = match backend {
        Backend::Fixed => drive_all::<Decimal>(strategies, &samples)?,
        Backend::Reference => drive_all::<Reference>(strategies, &samples)?,
    };
    let tolerance = Decimal::from_raw(1_000_000_000_000); // 1e-6
    for (old, new) in recorded.rows.iter().zip(&fresh.rows) {
        for (col, (a, b)) in recorded.strategies.iter().zip(old.cells.iter().zip(&new.cells)) {
            let a_fields = a.fields();
            let b_fields = b.fields();
            if a_fields.len() != b_fields.len() {
                return Err(EngineError::StrategyMismatch { expected: vec![col.name.clone()], found: vec![col.name.clone()] });
            }
            for ((field, recorded_v), (_, replayed_v)) in a_fields.into_iter().zip(b_fields) {
                let ok = match backend {
                    Backend::Fixed => recorded_v == replayed_v,
                    Backend::Reference => within_relative(recorded_v, replayed_v, tolerance),
                };
                if !ok {
                    return Err(EngineError::Regression {
                        step: old.step,
                        column: format!("{}.{field}", col.name),
                        recorded: recorded_v,
                        replayed: replayed_v,
                    });
                }
            }
        }
    }
    Ok(fresh)
}

pub fn read_trace_file(path: &Path) -> Result<SimTrace, EngineError> {
    let file = std::fs::File::open(path).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))?;
    SimTrace::read_csv(std::io::BufReader::new(file))
}

pub fn replay_file(path: &Path, strategies: &[Strategy], backend: Backend) -> Result<SimTrace, EngineError> {
    replay(&read_trace_file(path)?, strategies, backend)
}
