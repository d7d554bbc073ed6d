//! Seeded utilization trajectories and a delayed linear market response.
//!
//! Randomness comes from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Random-walk segments draw from that
//! stream in order; closed-loop noise draws from the same generator advanced
//! by one `jump()` (2^128 outputs), so the two never overlap.
//!
//! A uniform draw `z` in `[-1, 1)` is built from the top 53 bits `x` of a
//! 64-bit output as `z = 2x / 2^53 - 1`, rounded to 18 digits.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::numerics::{Decimal, NumericError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Segment {
    /// Moves linearly from `from` (default: the current level) to `to`,
    /// reaching `to` on the last of `steps` samples.
    #[serde(rename = "linear-ramp")]
    LinearRamp {
        #[serde(default)]
        from: Option<Decimal>,
        to: Decimal,
        steps: u32,
    },
    /// Holds `value` (default: the current level).
    #[serde(rename = "hold")]
    Hold {
        #[serde(default)]
        value: Option<Decimal>,
        steps: u32,
    },
    /// Jumps by `size` on the first sample, then holds.
    #[serde(rename = "step")]
    Step { size: Decimal, steps: u32 },
    /// Adds `volatility * z` per sample, `z` uniform in `[-1, 1)`.
    #[serde(rename = "random-walk")]
    RandomWalk { volatility: Decimal, steps: u32 },
}

impl Segment {
    pub fn steps(&self) -> u32 {
        match self {
            Segment::LinearRamp { steps, .. }
            | Segment::Hold { steps, .. }
            | Segment::Step { steps, .. }
            | Segment::RandomWalk { steps, .. } => *steps,
        }
    }
}

/// Linear utilization response to the rate seen `delay` steps earlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackModel {
    /// Utilization change per unit of rate above `reference_rate`, per step.
    pub elasticity: Decimal,
    pub reference_rate: Decimal,
    pub delay: u32,
    #[serde(default)]
    pub noise_volatility: Decimal,
}

fn default_dt() -> u64 {
    3600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Seconds per step.
    #[serde(default = "default_dt")]
    pub dt: u64,
    #[serde(default)]
    pub seed: u64,
    /// Timestamp of step 0; step `i` is observed at `start_time + i * dt`.
    #[serde(default)]
    pub start_time: u64,
    #[serde(default)]
    pub initial_utilization: Decimal,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub feedback: Option<FeedbackModel>,
}

/// One observation: steps are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub step: u32,
    pub timestamp: u64,
    pub utilization: Decimal,
}

fn in_unit(v: Decimal) -> bool {
    v >= Decimal::ZERO && v <= Decimal::ONE
}

impl ScenarioSpec {
    /// Ramp from the initial level to `to` over `ramp` steps, then hold for `hold` steps.
    pub fn ramp_then_hold(to: Decimal, ramp: u32, hold: u32) -> Self {
        ScenarioSpec {
            dt: default_dt(),
            seed: 0,
            start_time: 0,
            initial_utilization: Decimal::ZERO,
            segments: vec![
                Segment::LinearRamp { from: None, to, steps: ramp },
                Segment::Hold { value: None, steps: hold },
            ],
            feedback: None,
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.segments.iter().map(|s| u64::from(s.steps())).sum()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.dt == 0 {
            return bad("dt must be positive".into());
        }
        if self.segments.is_empty() {
            return bad("at least one segment is required".into());
        }
        if !in_unit(self.initial_utilization) {
            return bad(format!("initial_utilization {} outside [0, 1]", self.initial_utilization));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.steps() == 0 {
                return bad(format!("segment {i}: steps must be at least 1"));
            }
            let check = |v: Decimal, what: &str| {
                if in_unit(v) { Ok(()) } else { bad(format!("segment {i}: {what} {v} outside [0, 1]")) }
            };
            match seg {
                Segment::LinearRamp { from, to, .. } => {
                    if let Some(f) = from {
                        check(*f, "from")?;
                    }
                    check(*to, "to")?;
                }
                Segment::Hold { value: Some(v), .. } => check(*v, "value")?,
                Segment::Hold { value: None, .. } | Segment::Step { .. } => {}
                Segment::RandomWalk { volatility, .. } => {
                    if volatility.is_negative() {
                        return bad(format!("segment {i}: volatility must be non-negative"));
                    }
                }
            }
        }
        let end = self
            .total_steps()
            .checked_mul(self.dt)
            .and_then(|span| span.checked_add(self.start_time));
        if end.is_none_or(|e| e > i64::MAX as u64) {
            return bad("scenario timestamps overflow".into());
        }
        if let Some(fb) = &self.feedback {
            if fb.delay == 0 {
                return bad("feedback delay must be at least 1 step".into());
            }
            if fb.elasticity.is_negative() || fb.noise_volatility.is_negative() {
                return bad("feedback elasticity and noise must be non-negative".into());
            }
            if fb.reference_rate.is_negative() {
                return bad("feedback reference_rate must be non-negative".into());
            }
        }
        Ok(())
    }

    pub fn timestamp(&self, step: u32) -> u64 {
        self.start_time + u64::from(step) * self.dt
    }

    /// Open-loop utilization path.
    pub fn generate(&self) -> Result<Vec<Sample>, ScenarioError> {
        self.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.total_steps() as usize);
        let mut level = self.initial_utilization;
        let mut step = 0u32;
        for seg in &self.segments {
            let n = seg.steps();
            let start = level;
            for i in 1..=n {
                level = match seg {
                    Segment::LinearRamp { from, to, .. } => {
                        let from = from.unwrap_or(start);
                        let delta = to.checked_sub(from)?;
                        from.checked_add(delta.checked_mul_int(i128::from(i))?.checked_div_int(i128::from(n))?)?
                    }
                    Segment::Hold { value, .. } => value.unwrap_or(start),
                    Segment::Step { size, .. } => {
                        if i == 1 { start.checked_add(*size)? } else { level }
                    }
                    Segment::RandomWalk { volatility, .. } => {
                        level.checked_add(volatility.checked_mul(uniform_symmetric(&mut rng))?)?
                    }
                }
                .clamp(Decimal::ZERO, Decimal::ONE);
                step += 1;
                out.push(Sample { step, timestamp: self.timestamp(step), utilization: level });
            }
        }
        Ok(out)
    }

    /// Noise stream for closed-loop runs, disjoint from the walk stream.
    pub fn noise_source(&self) -> NoiseSource {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(self.seed);
        rng.jump();
        NoiseSource { rng }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: Xoshiro256PlusPlus,
}

impl NoiseSource {
    /// `volatility * z` with `z` uniform in `[-1, 1)`; draws nothing when volatility is zero.
    pub fn draw(&mut self, volatility: Decimal) -> Result<Decimal, NumericError> {
        if volatility.is_zero() {
            return Ok(Decimal::ZERO);
        }
        volatility.checked_mul(uniform_symmetric(&mut self.rng))
    }
}

fn uniform_symmetric(rng: &mut Xoshiro256PlusPlus) -> Decimal {
    const TWO_53: i128 = 1 << 53;
    let x = i128::from(rng.next_u64() >> 11);
    Decimal::from_raw((2 * x - TWO_53) * crate::numerics::SCALE)
        .checked_div_int(TWO_53)
        .expect("divisor is non-zero")
}

/// `clamp(u_prev - elasticity * (rate_delayed - reference_rate) + noise, 0, 1)`.
pub fn feedback_next(
    model: &FeedbackModel,
    u_prev: Decimal,
    rate_delayed: Decimal,
    noise: Decimal,
) -> Result<Decimal, NumericError> {
    let pressure = model.elasticity.checked_mul(rate_delayed.checked_sub(model.reference_rate)?)?;
    Ok(u_prev.checked_sub(pressure)?.checked_add(noise)?.clamp(Decimal::ZERO, Decimal::ONE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn ramp_midpoint_and_hold() {
        let spec = ScenarioSpec::ramp_then_hold(d("0.8"), 50, 50);
        let path = spec.generate().unwrap();
        assert_eq!(path.len(), 100);
        assert_eq!(path[24].step, 25);
        assert_eq!(path[24].utilization, d("0.4"));
        assert_eq!(path[49].utilization, d("0.8"));
        assert!(path[50..].iter().all(|s| s.utilization == d("0.8")));
        assert_eq!(path[0].timestamp, 3600);
        assert!(path.windows(2).all(|w| w[1].timestamp > w[0].timestamp));
    }

    #[test]
    fn hold_with_explicit_value() {
        let spec = ScenarioSpec {
            segments: vec![Segment::Hold { value: Some(d("0.8")), steps: 50 }],
            ..ScenarioSpec::ramp_then_hold(d("0"), 1, 1)
        };
        assert!(spec.generate().unwrap().iter().all(|s| s.utilization == d("0.8")));
    }

    #[test]
    fn step_segment_jumps_and_clamps() {
        let spec = ScenarioSpec {
            initial_utilization: d("0.7"),
            segments: vec![Segment::Step { size: d("0.2"), steps: 2 }, Segment::Step { size: d("0.5"), steps: 1 }],
            ..ScenarioSpec::ramp_then_hold(d("0"), 1, 1)
        };
        let u: Vec<_> = spec.generate().unwrap().iter().map(|s| s.utilization).collect();
        assert_eq!(u, vec![d("0.9"), d("0.9"), d("1")]);
    }

    #[test]
    fn random_walk_is_seeded_and_bounded() {
        let spec = ScenarioSpec {
            seed: 42,
            initial_utilization: d("0.5"),
            segments: vec![Segment::RandomWalk { volatility: d("0.2"), steps: 500 }],
            ..ScenarioSpec::ramp_then_hold(d("0"), 1, 1)
        };
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| in_unit(s.utilization)));
        let other = ScenarioSpec { seed: 43, ..spec }.generate().unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn validation_errors() {
        let mut spec = ScenarioSpec::ramp_then_hold(d("1.2"), 5, 5);
        assert!(spec.generate().is_err());
        spec = ScenarioSpec::ramp_then_hold(d("0.5"), 0, 5);
        assert!(spec.validate().is_err());
        spec = ScenarioSpec::ramp_then_hold(d("0.5"), 5, 5);
        spec.segments.clear();
        assert!(spec.validate().is_err());
        spec = ScenarioSpec::ramp_then_hold(d("0.5"), 5, 5);
        spec.feedback = Some(FeedbackModel {
            elasticity: d("0.1"),
            reference_rate: d("0.1"),
            delay: 0,
            noise_volatility: d("0"),
        });
        assert!(spec.validate().is_err());
    }

    #[test]
    fn parses_kebab_case_segments() {
        let spec: ScenarioSpec = serde_json::from_str(
            r#"{"segments":[{"kind":"linear-ramp","to":"0.8","steps":50},{"kind":"random-walk","volatility":"0.01","steps":3}]}"#,
        )
        .unwrap();
        assert_eq!(spec.dt, 3600);
        assert_eq!(spec.total_steps(), 53);
    }

    #[test]
    fn feedback_examples() {
        let fb = FeedbackModel {
            elasticity: d("0.1"),
            reference_rate: d("0.2"),
            delay: 1,
            noise_volatility: d("0"),
        };
        assert_eq!(feedback_next(&fb, d("0.6"), d("0.2"), d("0")).unwrap(), d("0.6"));
        assert!(feedback_next(&fb, d("0.6"), d("0.5"), d("0")).unwrap() < d("0.6"));
        assert_eq!(feedback_next(&fb, d("0.6"), d("1.2"), d("0")).unwrap(), d("0.5"));
        let inert = FeedbackModel { elasticity: d("0"), ..fb };
        assert_eq!(feedback_next(&inert, d("0.6"), d("9"), d("0.05")).unwrap(), d("0.65"));
        assert_eq!(feedback_next(&inert, d("0.99"), d("9"), d("0.05")).unwrap(), d("1"));
    }

    #[test]
    fn uniform_draws_cover_symmetric_range() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        let draws: Vec<_> = (0..2000).map(|_| uniform_symmetric(&mut rng)).collect();
        assert!(draws.iter().all(|z| *z >= d("-1") && *z < d("1")));
        assert!(draws.iter().any(|z| *z < d("-0.9")));
        assert!(draws.iter().any(|z| *z > d("0.9")));
    }
}
