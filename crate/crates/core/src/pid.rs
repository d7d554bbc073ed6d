//! PID interest rate controller.
//!
//! Utilization is turned into a normalized error in `[-1, 1]`, passed through
//! proportional, integral and derivative terms, clamped back to `[-1, 1]`, and
//! mapped to a borrow rate by `r = m * ((c + 1) / 2)^n`.
//!
//! The integral and derivative terms share one accumulator, the time-weighted
//! cumulative error (TWCE): the running sum of `error * elapsed_seconds`. The
//! derivative compares two snapshots of it taken at least one
//! `derivative_period` apart.

use serde::{Deserialize, Serialize};

use crate::error::IrmError;
use crate::numerics::{Decimal, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidConfig {
    /// Proportional gain.
    pub k_p: Decimal,
    /// Integral gain, per second of accumulated error.
    pub k_i: Decimal,
    /// Derivative gain applied to the TWCE slope.
    pub k_d: Decimal,
    /// Utilization set-point, strictly inside `(0, 1)`.
    pub u_optimal: Decimal,
    /// Rate at full controller output.
    pub m: Decimal,
    /// Shape exponent of the transfer function.
    pub n: Decimal,
    /// Minimum spacing, in seconds, between the two TWCE snapshots.
    pub derivative_period: u64,
    pub derivative_enabled: bool,
}

impl PidConfig {
    pub fn validate(&self) -> Result<(), IrmError> {
        let bad = |msg: String| Err(IrmError::InvalidConfig(msg));
        if self.u_optimal <= Decimal::ZERO || self.u_optimal >= Decimal::ONE {
            return bad(format!("u_optimal {} must lie in (0, 1)", self.u_optimal));
        }
        if !self.m.is_positive() {
            return bad(format!("m {} must be positive", self.m));
        }
        if !self.n.is_positive() {
            return bad(format!("n {} must be positive", self.n));
        }
        for (name, gain) in [("k_p", self.k_p), ("k_i", self.k_i), ("k_d", self.k_d)] {
            if gain.is_negative() {
                return bad(format!("{name} {gain} must be non-negative"));
            }
        }
        if self.derivative_period == 0 {
            return bad("derivative_period must be positive".into());
        }
        Ok(())
    }

    /// Baseline rate at zero controller output, `m * 0.5^n`.
    pub fn rate_at_optimal(&self) -> Result<Decimal, IrmError> {
        transfer_function(&Decimal::ZERO, &self.m, &self.n)
    }
}

/// Controller memory. Timestamps are whole seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidState<S = Decimal> {
    pub twce: S,
    pub last_update: u64,
    pub twce_previous: S,
    pub t_previous: u64,
    pub twce_delayed: S,
    pub t_delayed: u64,
    pub initialized: bool,
}

impl<S: Scalar> Default for PidState<S> {
    fn default() -> Self {
        PidState {
            twce: S::zero(),
            last_update: 0,
            twce_previous: S::zero(),
            t_previous: 0,
            twce_delayed: S::zero(),
            t_delayed: 0,
            initialized: false,
        }
    }
}

impl<S: Scalar> PidState<S> {
    /// Empty memory whose clock starts at `now`; both snapshot slots sit at `now`.
    pub fn started_at(now: u64) -> Self {
        PidState {
            last_update: now,
            t_previous: now,
            t_delayed: now,
            initialized: true,
            ..Default::default()
        }
    }

    pub fn to_decimal(&self) -> Result<PidState<Decimal>, IrmError> {
        Ok(PidState {
            twce: self.twce.to_decimal()?,
            last_update: self.last_update,
            twce_previous: self.twce_previous.to_decimal()?,
            t_previous: self.t_previous,
            twce_delayed: self.twce_delayed.to_decimal()?,
            t_delayed: self.t_delayed,
            initialized: self.initialized,
        })
    }
}

/// Every intermediate of one controller evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerBreakdown<S = Decimal> {
    pub u_error: S,
    pub u_p: S,
    /// Integral term after the anti-windup floor.
    pub u_i: S,
    /// Integral term before the anti-windup floor.
    pub u_i_raw: S,
    pub u_d: S,
    /// `clamp(u_p + u_i + u_d, -1, 1)`.
    pub controller_error: S,
    pub rate: S,
}

impl<S: Scalar> ControllerBreakdown<S> {
    pub fn to_decimal(&self) -> Result<ControllerBreakdown<Decimal>, IrmError> {
        Ok(ControllerBreakdown {
            u_error: self.u_error.to_decimal()?,
            u_p: self.u_p.to_decimal()?,
            u_i: self.u_i.to_decimal()?,
            u_i_raw: self.u_i_raw.to_decimal()?,
            u_d: self.u_d.to_decimal()?,
            controller_error: self.controller_error.to_decimal()?,
            rate: self.rate.to_decimal()?,
        })
    }
}

pub(crate) fn check_utilization<S: Scalar>(u: &S) -> Result<(), IrmError> {
    if *u < S::zero() || *u > S::one() {
        return Err(IrmError::UtilizationOutOfRange(
            u.to_decimal().unwrap_or(Decimal::MAX),
        ));
    }
    Ok(())
}

/// Maps `[0, u_optimal]` linearly onto `[-1, 0]` and `[u_optimal, 1]` onto `[0, 1]`.
pub fn normalize_error<S: Scalar>(u: &S, u_optimal: &S) -> Result<S, IrmError> {
    check_utilization(u)?;
    if *u_optimal <= S::zero() || *u_optimal >= S::one() {
        return Err(IrmError::InvalidConfig(format!(
            "u_optimal {:?} must lie in (0, 1)",
            u_optimal
        )));
    }
    let diff = u.sub(u_optimal)?;
    let span = if *u <= *u_optimal { u_optimal.clone() } else { S::one().sub(u_optimal)? };
    Ok(diff.div(&span)?)
}

pub fn proportional<S: Scalar>(e: &S, k_p: &S) -> Result<S, IrmError> {
    Ok(k_p.mul(e)?)
}

/// Adds `e * (now - last_update)` to the TWCE, then rotates the snapshot
/// slots once `now` is at least `period` seconds past the delayed slot.
///
/// An uninitialized state starts its clock at `now`, so the first call
/// contributes nothing to the accumulator.
pub fn accumulate<S: Scalar>(
    state: &PidState<S>,
    e: &S,
    now: u64,
    period: u64,
) -> Result<PidState<S>, IrmError> {
    let mut next = if state.initialized { state.clone() } else { PidState::started_at(now) };
    if now < next.last_update {
        return Err(IrmError::ClockRegression { last: next.last_update, now });
    }
    let elapsed = now - next.last_update;
    if elapsed > 0 {
        let elapsed = S::from_int(i64::try_from(elapsed).map_err(|_| {
            IrmError::InvalidConfig(format!("elapsed time {elapsed}s out of range"))
        })?);
        next.twce = next.twce.add(&e.mul(&elapsed)?)?;
    }
    next.last_update = now;
    if now - next.t_delayed >= period {
        next.twce_previous = std::mem::replace(&mut next.twce_delayed, next.twce.clone());
        next.t_previous = std::mem::replace(&mut next.t_delayed, now);
    }
    Ok(next)
}

/// Returns `(u_i, u_i_raw)`. While utilization is above optimal the applied
/// term is floored at `-0.5 * u_p`; the accumulator itself is left untouched.
pub fn integral_term<S: Scalar>(
    state: &PidState<S>,
    k_i: &S,
    u_p: &S,
    e: &S,
) -> Result<(S, S), IrmError> {
    let raw = k_i.mul(&state.twce)?;
    let applied = if e.is_positive() {
        // -(u_p - u_p/2) rounds toward zero, so the floor never dips below -u_p/2.
        let floor = u_p.sub(&u_p.mul(&S::from_decimal(Decimal::HALF))?)?.neg()?;
        raw.clone().max_of(floor)
    } else {
        raw.clone()
    };
    Ok((applied, raw))
}

/// `k_d * (twce_delayed - twce_previous) / (t_delayed - t_previous)`, or zero
/// until the two snapshot slots hold distinct timestamps.
pub fn derivative_term<S: Scalar>(state: &PidState<S>, k_d: &S) -> Result<S, IrmError> {
    if !state.initialized || state.t_delayed <= state.t_previous {
        return Ok(S::zero());
    }
    let span = S::from_int((state.t_delayed - state.t_previous) as i64);
    let slope = state.twce_delayed.sub(&state.twce_previous)?.div(&span)?;
    Ok(k_d.mul(&slope)?)
}

/// `m * ((c + 1) / 2)^n` for a controller output `c` in `[-1, 1]`.
pub fn transfer_function<S: Scalar>(controller_error: &S, m: &S, n: &S) -> Result<S, IrmError> {
    let base = controller_error.add(&S::one())?.div(&S::from_int(2))?;
    Ok(m.mul(&base.pow(n)?)?)
}

/// Shape exponent placing the curve through `(0, r_o)`: `n = ln(m / r_o) / ln 2`.
pub fn solve_shape(r_o: Decimal, m: Decimal) -> Result<Decimal, IrmError> {
    if !r_o.is_positive() || r_o >= m {
        return Err(IrmError::InfeasibleAnchor { rate: r_o, m });
    }
    let ratio = m.checked_div(r_o)?;
    Ok(ratio.log(Decimal::TWO)?)
}

/// Controller outputs before the transfer function.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerTerms<S = Decimal> {
    pub u_error: S,
    pub u_p: S,
    pub u_i: S,
    pub u_i_raw: S,
    pub u_d: S,
    pub controller_error: S,
}

/// Normalize, accumulate, sum the three terms and clamp to `[-1, 1]`.
pub fn controller_terms<S: Scalar>(
    config: &PidConfig,
    state: &PidState<S>,
    u: &S,
    now: u64,
) -> Result<(PidState<S>, ControllerTerms<S>), IrmError> {
    let u_error = normalize_error(u, &S::from_decimal(config.u_optimal))?;
    let next = accumulate(state, &u_error, now, config.derivative_period)?;
    let u_p = proportional(&u_error, &S::from_decimal(config.k_p))?;
    let (u_i, u_i_raw) = integral_term(&next, &S::from_decimal(config.k_i), &u_p, &u_error)?;
    let u_d = if config.derivative_enabled {
        derivative_term(&next, &S::from_decimal(config.k_d))?
    } else {
        S::zero()
    };
    let controller_error = u_p.add(&u_i)?.add(&u_d)?.clamp_to(S::one().neg()?, S::one());
    Ok((next, ControllerTerms { u_error, u_p, u_i, u_i_raw, u_d, controller_error }))
}

/// One full controller step: [`controller_terms`] followed by the transfer function.
pub fn update_and_rate<S: Scalar>(
    config: &PidConfig,
    state: &PidState<S>,
    u: &S,
    now: u64,
) -> Result<(PidState<S>, ControllerBreakdown<S>), IrmError> {
    let (next, t) = controller_terms(config, state, u, now)?;
    let rate = transfer_function(
        &t.controller_error,
        &S::from_decimal(config.m),
        &S::from_decimal(config.n),
    )?;
    let breakdown = ControllerBreakdown {
        u_error: t.u_error,
        u_p: t.u_p,
        u_i: t.u_i,
        u_i_raw: t.u_i_raw,
        u_d: t.u_d,
        controller_error: t.controller_error,
        rate,
    };
    Ok((next, breakdown))
}

/// A [`PidConfig`] bundled with its evolving state.
#[derive(Debug, Clone)]
pub struct PidController<S = Decimal> {
    config: PidConfig,
    state: PidState<S>,
}

impl<S: Scalar> PidController<S> {
    pub fn new(config: PidConfig) -> Result<Self, IrmError> {
        config.validate()?;
        Ok(PidController { config, state: PidState::default() })
    }

    pub fn config(&self) -> &PidConfig {
        &self.config
    }

    pub fn state(&self) -> &PidState<S> {
        &self.state
    }

    pub fn update(&mut self, u: &S, now: u64) -> Result<ControllerBreakdown<S>, IrmError> {
        let (state, breakdown) = update_and_rate(&self.config, &self.state, u, now)?;
        self.state = state;
        Ok(breakdown)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Reference;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn config() -> PidConfig {
        PidConfig {
            k_p: d("1"),
            k_i: d("0.00001"),
            k_d: d("0.1"),
            u_optimal: d("0.5"),
            m: d("4"),
            n: d("6"),
            derivative_period: 10,
            derivative_enabled: true,
        }
    }

    #[test]
    fn normalize_error_examples() {
        assert_eq!(normalize_error(&d("0.5"), &d("0.5")).unwrap(), d("0"));
        assert_eq!(normalize_error(&d("0"), &d("0.5")).unwrap(), d("-1"));
        assert_eq!(normalize_error(&d("0.8"), &d("0.5")).unwrap(), d("0.6"));
        assert_eq!(normalize_error(&d("1"), &d("0.7")).unwrap(), d("1"));
        assert_eq!(normalize_error(&d("0"), &d("0.7")).unwrap(), d("-1"));
    }

    #[test]
    fn normalize_error_rejects_out_of_range() {
        assert!(matches!(
            normalize_error(&d("1.01"), &d("0.5")),
            Err(IrmError::UtilizationOutOfRange(_))
        ));
        assert!(normalize_error(&d("-0.01"), &d("0.5")).is_err());
        assert!(normalize_error(&d("0.3"), &d("1")).is_err());
    }

    #[test]
    fn proportional_examples() {
        assert_eq!(proportional(&d("0.6"), &d("1")).unwrap(), d("0.6"));
        assert_eq!(proportional(&d("0"), &d("7.3")).unwrap(), d("0"));
        assert_eq!(proportional(&d("-0.5"), &d("0.2")).unwrap(), d("-0.1"));
    }

    #[test]
    fn accumulate_cancels_opposite_errors() {
        let s = PidState::<Decimal>::started_at(0);
        let s = accumulate(&s, &d("0.5"), 2, 100).unwrap();
        assert_eq!(s.twce, d("1"));
        let s = accumulate(&s, &d("-0.25"), 6, 100).unwrap();
        assert_eq!(s.twce, d("0"));
        assert_eq!(s.last_update, 6);
    }

    #[test]
    fn accumulate_zero_error_leaves_twce() {
        let s = PidState { twce: d("3.5"), ..PidState::<Decimal>::started_at(10) };
        let s2 = accumulate(&s, &d("0"), 1_000_000, 50).unwrap();
        assert_eq!(s2.twce, d("3.5"));
    }

    #[test]
    fn accumulate_first_call_initializes() {
        let s = accumulate(&PidState::<Decimal>::default(), &d("0.9"), 500, 10).unwrap();
        assert!(s.initialized);
        assert_eq!(s.twce, Decimal::ZERO);
        assert_eq!((s.t_previous, s.t_delayed, s.last_update), (500, 500, 500));
    }

    #[test]
    fn accumulate_rejects_clock_regression() {
        let s = PidState::<Decimal>::started_at(100);
        assert_eq!(
            accumulate(&s, &d("0.1"), 99, 10),
            Err(IrmError::ClockRegression { last: 100, now: 99 })
        );
    }

    #[test]
    fn accumulate_same_timestamp_is_legal() {
        let s = PidState::<Decimal>::started_at(100);
        let s = accumulate(&s, &d("0.7"), 100, 10).unwrap();
        assert_eq!(s.twce, Decimal::ZERO);
    }

    #[test]
    fn slots_rotate_after_a_period() {
        let mut s = PidState::<Decimal>::started_at(0);
        for t in 1..=9 {
            s = accumulate(&s, &d("0.3"), t, 10).unwrap();
            assert_eq!((s.t_previous, s.t_delayed), (0, 0));
        }
        s = accumulate(&s, &d("0.3"), 10, 10).unwrap();
        assert_eq!((s.t_previous, s.t_delayed), (0, 10));
        assert_eq!(s.twce_delayed, d("3"));
        assert_eq!(s.twce_previous, d("0"));
        for t in 11..=20 {
            s = accumulate(&s, &d("0.3"), t, 10).unwrap();
        }
        assert_eq!((s.t_previous, s.t_delayed), (10, 20));
        assert!(s.t_previous <= s.t_delayed && s.t_delayed <= s.last_update);
    }

    #[test]
    fn integral_term_examples() {
        let s = PidState { twce: d("10"), ..PidState::<Decimal>::started_at(0) };
        let (ui, raw) = integral_term(&s, &d("0.01"), &d("0.6"), &d("-0.2")).unwrap();
        assert_eq!((ui, raw), (d("0.1"), d("0.1")));
        let (ui, _) = integral_term(&s, &d("0.01"), &d("0.6"), &d("0")).unwrap();
        assert_eq!(ui, d("0.1"));

        let s = PidState { twce: d("-100"), ..PidState::<Decimal>::started_at(0) };
        let (ui, raw) = integral_term(&s, &d("0.01"), &d("0.6"), &d("0.6")).unwrap();
        assert_eq!((ui, raw), (d("-0.3"), d("-1")));

        let s = PidState { twce: d("-10"), ..PidState::<Decimal>::started_at(0) };
        let (ui, raw) = integral_term(&s, &d("0.01"), &d("0.6"), &d("0.6")).unwrap();
        assert_eq!((ui, raw), (d("-0.1"), d("-0.1")));
    }

    #[test]
    fn integral_clamp_not_applied_at_exact_optimal() {
        let s = PidState { twce: d("-100"), ..PidState::<Decimal>::started_at(0) };
        let (ui, _) = integral_term(&s, &d("0.01"), &d("0"), &d("0")).unwrap();
        assert_eq!(ui, d("-1"));
    }

    #[test]
    fn derivative_term_examples() {
        let s = PidState {
            twce_previous: d("0"),
            t_previous: 0,
            twce_delayed: d("6"),
            t_delayed: 10,
            ..PidState::<Decimal>::started_at(0)
        };
        assert_eq!(derivative_term(&s, &d("0.1")).unwrap(), d("0.06"));
        assert_eq!(derivative_term(&PidState::<Decimal>::default(), &d("0.1")).unwrap(), d("0"));
        assert_eq!(
            derivative_term(&PidState::<Decimal>::started_at(42), &d("0.1")).unwrap(),
            d("0")
        );
    }

    #[test]
    fn derivative_of_constant_error_is_that_error() {
        let mut s = PidState::<Decimal>::started_at(0);
        for t in (7..=70).step_by(7) {
            s = accumulate(&s, &d("0.3"), t, 20).unwrap();
        }
        assert!(s.t_previous > 0, "two full periods must have elapsed");
        assert_eq!(derivative_term(&s, &d("1")).unwrap(), d("0.3"));
        assert_eq!(derivative_term(&s, &d("0.25")).unwrap(), d("0.075"));
    }

    #[test]
    fn transfer_function_anchors() {
        let (m, n) = (d("3"), d("2.5"));
        assert_eq!(transfer_function(&d("-1"), &m, &n).unwrap(), d("0"));
        assert_eq!(transfer_function(&d("1"), &m, &n).unwrap(), m);
        let mid = transfer_function(&d("0"), &d("2"), &d("1")).unwrap();
        assert_eq!(mid, d("1"));
    }

    #[test]
    fn solve_shape_examples() {
        let m = d("3.2");
        assert_eq!(solve_shape(d("1.6"), m).unwrap(), d("1"));
        assert_eq!(solve_shape(d("0.8"), m).unwrap(), d("2"));
        assert!(matches!(solve_shape(d("3.2"), m), Err(IrmError::InfeasibleAnchor { .. })));
        assert!(solve_shape(d("0"), m).is_err());
    }

    #[test]
    fn first_update_at_optimal_gives_baseline() {
        let cfg = config();
        let (state, b) = update_and_rate(&cfg, &PidState::default(), &d("0.5"), 1000).unwrap();
        assert!(state.initialized);
        assert_eq!(b.u_i, Decimal::ZERO);
        assert_eq!(b.u_d, Decimal::ZERO);
        assert_eq!(b.rate, cfg.rate_at_optimal().unwrap());
        assert_eq!(b.rate, d("0.0625"));
    }

    #[test]
    fn held_optimal_keeps_rate() {
        let mut cfg = config();
        cfg.derivative_enabled = false;
        let mut pid = PidController::<Decimal>::new(cfg).unwrap();
        pid.update(&d("0.9"), 0).unwrap();
        pid.update(&d("0.9"), 100).unwrap();
        let first = pid.update(&d("0.5"), 200).unwrap().rate;
        for t in 201..400 {
            assert_eq!(pid.update(&d("0.5"), t).unwrap().rate, first);
        }
    }

    #[test]
    fn controller_output_is_clamped() {
        let mut cfg = config();
        cfg.k_p = d("5");
        let (_, b) = update_and_rate(&cfg, &PidState::default(), &d("1"), 0).unwrap();
        assert_eq!(b.controller_error, d("1"));
        assert_eq!(b.rate, cfg.m);
        let (_, b) = update_and_rate(&cfg, &PidState::default(), &d("0"), 0).unwrap();
        assert_eq!(b.controller_error, d("-1"));
        assert_eq!(b.rate, Decimal::ZERO);
    }

    #[test]
    fn config_validation() {
        let mut cfg = config();
        assert!(cfg.validate().is_ok());
        cfg.u_optimal = d("1");
        assert!(cfg.validate().is_err());
        let mut cfg = config();
        cfg.k_i = d("-0.1");
        assert!(cfg.validate().is_err());
        let mut cfg = config();
        cfg.derivative_period = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reference_backend_matches_fixed() {
        let cfg = config();
        let mut fixed = PidController::<Decimal>::new(cfg.clone()).unwrap();
        let mut reference = PidController::<Reference>::new(cfg).unwrap();
        for step in 0..40u64 {
            let u = Decimal::from_raw(20_000_000_000_000_000 * (step as i128 % 50));
            let a = fixed.update(&u, step * 3).unwrap().rate;
            let b = reference.update(&Reference::from_decimal(u), step * 3).unwrap().rate;
            let b = b.to_decimal().unwrap();
            assert!((a.raw() - b.raw()).abs() <= 2, "step {step}: {a} vs {b}");
        }
    }

    #[test]
    fn snapshot_is_flat_record() {
        let s = PidState { twce: d("-1.5"), ..PidState::<Decimal>::started_at(7) };
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["twce"], "-1.500000000000000000");
        assert_eq!(json["last_update"], 7);
        let back: PidState = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
    }
}
