//! Coarse grid search for PID transfer-function shape and gains.
//!
//! Each target fixes a scenario, a gain mode and a step at which the rate
//! should land near a given value. The controller output `c` at that step
//! depends only on the gains (`k_i`, `k_d`), never on `m` or `n`, so the
//! search simulates each distinct gain pair once and then sweeps the shape
//! parameters through the transfer function alone. The objective is the
//! largest relative miss over all targets; ties go to the earliest grid
//! point in `m`, `n`, `k_i`, `k_d` order.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{read_text, ConfigError};
use crate::engine::{self, EngineError};
use crate::error::IrmError;
use crate::numerics::{Backend, Decimal, NumericError};
use crate::pid::{controller_terms, transfer_function, PidConfig, PidState};
use crate::scenario::ScenarioSpec;
use crate::strategy::{IrmKind, Strategy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("empty search space: axis {0} has no points")]
    EmptyAxis(&'static str),
    #[error("no calibration targets")]
    NoTargets,
    #[error("invalid calibration input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Model(#[from] IrmError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Which controller terms a target exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    P,
    Pi,
    Pid,
}

impl GainMode {
    /// Restricts `config` to this mode: unused gains are zeroed and the
    /// derivative is enabled only in full PID mode.
    pub fn project(self, config: &PidConfig) -> PidConfig {
        let mut c = config.clone();
        if self == GainMode::P {
            c.k_i = Decimal::ZERO;
        }
        if self != GainMode::Pid {
            c.k_d = Decimal::ZERO;
        }
        c.derivative_enabled = self == GainMode::Pid;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTarget {
    pub label: String,
    pub scenario: ScenarioSpec,
    pub mode: GainMode,
    pub step: u32,
    pub rate: Decimal,
    pub tolerance: Decimal,
}

/// One search dimension: an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<Decimal>),
    Range(AxisRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: Decimal,
    pub stop: Decimal,
    pub step: Decimal,
}

impl Axis {
    pub fn points(&self) -> Result<Vec<Decimal>, CalibrationError> {
        match self {
            Axis::Values(v) => Ok(v.clone()),
            Axis::Range(r) => {
                if !r.step.is_positive() {
                    return Err(CalibrationError::Invalid(format!("range step {} must be positive", r.step)));
                }
                let mut out = Vec::new();
                let mut x = r.start;
                while x <= r.stop {
                    out.push(x);
                    if out.len() > 1_000_000 {
                        return Err(CalibrationError::Invalid("axis has more than 10^6 points".into()));
                    }
                    x = x.checked_add(r.step)?;
                }
                Ok(out)
            }
        }
    }
}

fn zero_axis() -> Axis {
    Axis::Values(vec![Decimal::ZERO])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub m: Axis,
    pub n: Axis,
    #[serde(default = "zero_axis")]
    pub k_i: Axis,
    #[serde(default = "zero_axis")]
    pub k_d: Axis,
}

/// Grid points expanded from a [`SearchSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub m: Vec<Decimal>,
    pub n: Vec<Decimal>,
    pub k_i: Vec<Decimal>,
    pub k_d: Vec<Decimal>,
}

impl SearchSpace {
    pub fn expand(&self) -> Result<Grid, CalibrationError> {
        let grid = Grid { m: self.m.points()?, n: self.n.points()?, k_i: self.k_i.points()?, k_d: self.k_d.points()? };
        for (name, axis) in [("m", &grid.m), ("n", &grid.n), ("k_i", &grid.k_i), ("k_d", &grid.k_d)] {
            if axis.is_empty() {
                return Err(CalibrationError::EmptyAxis(name));
            }
        }
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        serde_json::from_str(&read_text(path)?).map_err(|e| ConfigError::Parse(e.to_string()).into())
    }
}

impl Grid {
    pub fn len(&self) -> u64 {
        [&self.m, &self.n, &self.k_i, &self.k_d].iter().map(|a| a.len() as u64).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gains that stay fixed during the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidTemplate {
    pub k_p: Decimal,
    pub u_optimal: Decimal,
    pub derivative_period: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub base: PidTemplate,
    pub targets: Vec<CalibrationTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpace>,
}

impl CalibrationFile {
    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        serde_json::from_str(&read_text(path)?).map_err(|e| ConfigError::Parse(e.to_string()).into())
    }

    pub fn config_at(&self, m: Decimal, n: Decimal, k_i: Decimal, k_d: Decimal) -> PidConfig {
        PidConfig {
            k_p: self.base.k_p,
            k_i,
            k_d,
            u_optimal: self.base.u_optimal,
            m,
            n,
            derivative_period: self.base.derivative_period,
            derivative_enabled: self.targets.iter().any(|t| t.mode == GainMode::Pid),
        }
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        if self.targets.is_empty() {
            return Err(CalibrationError::NoTargets);
        }
        for t in &self.targets {
            let bad = |m: String| Err(CalibrationError::Invalid(format!("target {:?}: {m}", t.label)));
            if !t.rate.is_positive() {
                return bad(format!("rate {} must be positive", t.rate));
            }
            if t.tolerance.is_negative() {
                return bad(format!("tolerance {} must be non-negative", t.tolerance));
            }
            if t.scenario.feedback.is_some() {
                return bad("closed-loop scenarios cannot be calibrated against".into());
            }
            t.scenario.validate().map_err(|e| CalibrationError::Invalid(e.to_string()))?;
            if t.step == 0 || u64::from(t.step) > t.scenario.total_steps() {
                return bad(format!("step {} outside the scenario's {} steps", t.step, t.scenario.total_steps()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetMiss {
    pub label: String,
    pub mode: GainMode,
    pub step: u32,
    pub target: Decimal,
    pub tolerance: Decimal,
    pub achieved: Decimal,
    pub relative_miss: Decimal,
    pub within: bool,
}

impl TargetMiss {
    fn new(t: &CalibrationTarget, achieved: Decimal) -> Result<Self, NumericError> {
        let diff = achieved.checked_sub(t.rate)?.abs();
        Ok(TargetMiss {
            label: t.label.clone(),
            mode: t.mode,
            step: t.step,
            target: t.rate,
            tolerance: t.tolerance,
            achieved,
            relative_miss: diff.checked_div(t.rate)?,
            within: diff <= t.tolerance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub config: PidConfig,
    /// Largest relative miss over all targets at `config`.
    pub objective: Decimal,
    /// Every target is within its absolute tolerance.
    pub feasible: bool,
    pub evaluated: u64,
    pub misses: Vec<TargetMiss>,
}

impl CalibrationReport {
    /// Fixed-width miss table, one line per target.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:<4} {:>5} {:>10} {:>10} {:>10} {:>10}  ok\n",
            "target", "mode", "step", "want", "tol", "got", "rel_miss"
        );
        for m in &self.misses {
            let mode = serde_json::to_value(m.mode).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            out.push_str(&format!(
                "{:<16} {:<4} {:>5} {:>10.6} {:>10.6} {:>10.6} {:>10.6}  {}\n",
                m.label,
                mode,
                m.step,
                short(m.target),
                short(m.tolerance),
                short(m.achieved),
                short(m.relative_miss),
                if m.within { "yes" } else { "NO" }
            ));
        }
        out
    }
}

fn short(d: Decimal) -> String {
    let s = d.to_string();
    match s.split_once('.') {
        Some((i, f)) => format!("{i}.{}", &f[..6]),
        None => s,
    }
}

fn controller_output_at(
    config: &PidConfig,
    scenario: &ScenarioSpec,
    step: u32,
) -> Result<Decimal, CalibrationError> {
    let mut state = PidState::<Decimal>::default();
    for sample in scenario.generate().map_err(EngineError::from)? {
        let (next, terms) = controller_terms(config, &state, &sample.utilization, sample.timestamp)?;
        if sample.step == step {
            return Ok(terms.controller_error);
        }
        state = next;
    }
    Err(CalibrationError::Invalid(format!("step {step} not reached")))
}

/// Exhaustive search over `space`. Infeasible targets are not an error: the
/// report carries the best point found and `feasible == false`.
pub fn calibrate(file: &CalibrationFile, space: &SearchSpace) -> Result<CalibrationReport, CalibrationError> {
    file.validate()?;
    let grid = space.expand()?;
    for &m in &grid.m {
        for &n in &grid.n {
            file.config_at(m, n, grid.k_i[0], grid.k_d[0]).validate()?;
        }
    }
    for &k_i in &grid.k_i {
        for &k_d in &grid.k_d {
            file.config_at(grid.m[0], grid.n[0], k_i, k_d).validate()?;
        }
    }

    // Controller output per (target, effective k_i, effective k_d).
    let mut keys: Vec<(usize, Decimal, Decimal)> = Vec::new();
    for (ti, t) in file.targets.iter().enumerate() {
        for &k_i in &grid.k_i {
            for &k_d in &grid.k_d {
                let c = t.mode.project(&file.config_at(Decimal::ONE, Decimal::ONE, k_i, k_d));
                keys.push((ti, c.k_i, c.k_d));
            }
        }
    }
    keys.sort();
    keys.dedup();
    let outputs: BTreeMap<(usize, Decimal, Decimal), Decimal> = keys
        .par_iter()
        .map(|&(ti, k_i, k_d)| {
            let t = &file.targets[ti];
            let config = t.mode.project(&file.config_at(Decimal::ONE, Decimal::ONE, k_i, k_d));
            controller_output_at(&config, &t.scenario, t.step).map(|c| ((ti, k_i, k_d), c))
        })
        .collect::<Result<_, _>>()?;

    let pairs: Vec<(usize, usize)> =
        (0..grid.k_i.len()).flat_map(|i| (0..grid.k_d.len()).map(move |d| (i, d))).collect();
    let n_ki = grid.k_i.len() as u64;
    let n_kd = grid.k_d.len() as u64;
    let n_n = grid.n.len() as u64;

    // Best (objective, grid index) for each gain pair.
    let best = pairs
        .par_iter()
        .map(|&(i, d)| -> Result<(Decimal, u64), CalibrationError> {
            let controller: Vec<Decimal> = file
                .targets
                .iter()
                .enumerate()
                .map(|(ti, t)| {
                    let c = t.mode.project(&file.config_at(Decimal::ONE, Decimal::ONE, grid.k_i[i], grid.k_d[d]));
                    outputs[&(ti, c.k_i, c.k_d)]
                })
                .collect();
            // Same arithmetic as `transfer_function`, with the power hoisted out of the `m` loop.
            let bases: Vec<Decimal> = controller
                .iter()
                .map(|c| c.checked_add(Decimal::ONE)?.checked_div(Decimal::TWO))
                .collect::<Result<_, _>>()?;
            let powers: Vec<Vec<Decimal>> = grid
                .n
                .iter()
                .map(|&n| bases.iter().map(|b| b.pow(n)).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()?;
            let mut best: Option<(Decimal, u64)> = None;
            for (im, &m) in grid.m.iter().enumerate() {
                for (inn, pw) in powers.iter().enumerate() {
                    let mut worst = Decimal::ZERO;
                    for (t, p) in file.targets.iter().zip(pw) {
                        let rate = m.checked_mul(*p)?;
                        let miss = rate.checked_sub(t.rate)?.abs().checked_div(t.rate)?;
                        worst = worst.max(miss);
                    }
                    let index = ((im as u64 * n_n + inn as u64) * n_ki + i as u64) * n_kd + d as u64;
                    if best.is_none_or(|b| (worst, index) < b) {
                        best = Some((worst, index));
                    }
                }
            }
            Ok(best.expect("grid is non-empty"))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .min()
        .expect("grid is non-empty");

    let (objective, index) = best;
    let d = (index % n_kd) as usize;
    let i = ((index / n_kd) % n_ki) as usize;
    let inn = ((index / (n_kd * n_ki)) % n_n) as usize;
    let im = (index / (n_kd * n_ki * n_n)) as usize;
    let config = file.config_at(grid.m[im], grid.n[inn], grid.k_i[i], grid.k_d[d]);
    let misses = file
        .targets
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let p = t.mode.project(&config);
            let c = outputs[&(ti, p.k_i, p.k_d)];
            Ok(TargetMiss::new(t, transfer_function(&c, &config.m, &config.n)?)?)
        })
        .collect::<Result<Vec<_>, CalibrationError>>()?;
    Ok(CalibrationReport {
        feasible: misses.iter().all(|m| m.within),
        config,
        objective,
        evaluated: grid.len(),
        misses,
    })
}

/// Re-evaluates `config` against every target with full engine runs.
pub fn evaluate(file: &CalibrationFile, config: &PidConfig) -> Result<Vec<TargetMiss>, CalibrationError> {
    file.validate()?;
    file.targets
        .iter()
        .map(|t| {
            let strategy = Strategy::new("pid", IrmKind::Pid(t.mode.project(config)));
            let trace = engine::run(&[strategy], &t.scenario, Backend::Fixed)?;
            let rate = trace
                .rate_at("pid", t.step)
                .ok_or_else(|| CalibrationError::Invalid(format!("step {} missing from trace", t.step)))?;
            Ok(TargetMiss::new(t, rate)?)
        })
        .collect()
}
