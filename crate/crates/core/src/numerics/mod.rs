//! Number types used by every rate model.
//!
//! [`Decimal`] is the production arithmetic: an 18-digit fixed-point integer
//! with checked, half-away-from-zero rounded operations. [`Reference`] is a
//! 50-digit decimal float that implements the same [`Scalar`] surface so any
//! model or simulation can be rerun on it and compared.

mod decimal;
mod reference;
mod transcendental;

use std::fmt::Debug;

pub use decimal::{Decimal, DIGITS, SCALE};
pub use reference::{Reference, REFERENCE_DIGITS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumericError {
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid decimal literal {0:?}")]
    Parse(String),
}

/// Arithmetic surface shared by the fixed-point and reference backends.
///
/// Every operation is fallible so the fixed-point backend can report overflow
/// instead of wrapping. `pow` is restricted to bases in `[0, 1]` and positive
/// exponents, which is all the transfer function needs.
pub trait Scalar: Clone + Debug + PartialEq + PartialOrd + Send + Sync + 'static {
    fn from_decimal(d: Decimal) -> Self;
    /// Rounds half away from zero to 18 fractional digits.
    fn to_decimal(&self) -> Result<Decimal, NumericError>;
    fn from_int(v: i64) -> Self;

    fn add(&self, rhs: &Self) -> Result<Self, NumericError>;
    fn sub(&self, rhs: &Self) -> Result<Self, NumericError>;
    fn mul(&self, rhs: &Self) -> Result<Self, NumericError>;
    fn div(&self, rhs: &Self) -> Result<Self, NumericError>;
    fn neg(&self) -> Result<Self, NumericError>;
    fn ln(&self) -> Result<Self, NumericError>;
    fn exp(&self) -> Result<Self, NumericError>;
    fn pow(&self, exponent: &Self) -> Result<Self, NumericError>;

    fn zero() -> Self {
        Self::from_int(0)
    }

    fn one() -> Self {
        Self::from_int(1)
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }

    fn max_of(self, other: Self) -> Self {
        if self >= other { self } else { other }
    }

    fn min_of(self, other: Self) -> Self {
        if self <= other { self } else { other }
    }

    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max_of(lo).min_of(hi)
    }
}

impl Scalar for Decimal {
    fn from_decimal(d: Decimal) -> Self {
        d
    }

    fn to_decimal(&self) -> Result<Decimal, NumericError> {
        Ok(*self)
    }

    fn from_int(v: i64) -> Self {
        Decimal::from_int(v)
    }

    fn add(&self, rhs: &Self) -> Result<Self, NumericError> {
        self.checked_add(*rhs)
    }

    fn sub(&self, rhs: &Self) -> Result<Self, NumericError> {
        self.checked_sub(*rhs)
    }

    fn mul(&self, rhs: &Self) -> Result<Self, NumericError> {
        self.checked_mul(*rhs)
    }

    fn div(&self, rhs: &Self) -> Result<Self, NumericError> {
        self.checked_div(*rhs)
    }

    fn neg(&self) -> Result<Self, NumericError> {
        self.checked_neg()
    }

    fn ln(&self) -> Result<Self, NumericError> {
        Decimal::ln(*self)
    }

    fn exp(&self) -> Result<Self, NumericError> {
        Decimal::exp(*self)
    }

    fn pow(&self, exponent: &Self) -> Result<Self, NumericError> {
        Decimal::pow(*self, *exponent)
    }

    fn zero() -> Self {
        Decimal::ZERO
    }

    fn one() -> Self {
        Decimal::ONE
    }
}

/// Which arithmetic a simulation runs on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Fixed,
    Reference,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(Backend::Fixed),
            "reference" => Ok(Backend::Reference),
            other => Err(format!("unknown backend {other:?} (expected fixed or reference)")),
        }
    }
}

/// `|fixed - reference| / max(|reference|, 1e-9)`, evaluated on the
/// reference backend so the comparison itself adds no rounding.
pub fn relative_gap(fixed: Decimal, reference: Decimal) -> Reference {
    let f = Reference::from_decimal(fixed);
    let r = Reference::from_decimal(reference);
    let diff = f.sub(&r).expect("reference arithmetic is total");
    let diff = if diff.is_negative() { diff.neg().expect("total") } else { diff };
    let mag = if r.is_negative() { r.neg().expect("total") } else { r };
    let floor = Reference::from_decimal(Decimal::from_raw(1_000_000_000));
    diff.div(&mag.max_of(floor)).expect("floor is non-zero")
}

/// True when `relative_gap(a, b) <= tol`.
pub fn within_relative(a: Decimal, b: Decimal, tol: Decimal) -> bool {
    relative_gap(a, b) <= Reference::from_decimal(tol)
}
