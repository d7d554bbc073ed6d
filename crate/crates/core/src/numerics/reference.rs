//! High-precision decimal backend used to cross-check the fixed-point path.
//!
//! Values are base-10 floats carrying [`REFERENCE_DIGITS`] significant digits
//! with half-away-from-zero rounding. Nothing here is used by the fixed-point
//! path itself; it exists so simulations can be rerun on an independent
//! arithmetic and compared cell by cell.

use std::cmp::Ordering;
use std::fmt;

use dashu_float::DBig;
use dashu_int::IBig;

use super::decimal::DIGITS;
use super::{Decimal, NumericError, Scalar};

/// Significant decimal digits carried by [`Reference`].
pub const REFERENCE_DIGITS: usize = 50;

#[derive(Clone, PartialEq, PartialOrd)]
pub struct Reference(DBig);

impl Reference {
    fn wrap(v: DBig) -> Self {
        Reference(v.with_precision(REFERENCE_DIGITS).value())
    }

    pub fn parse(s: &str) -> Result<Self, NumericError> {
        s.parse::<DBig>()
            .map(Self::wrap)
            .map_err(|_| NumericError::Parse(s.to_string()))
    }

    fn signum(&self) -> Ordering {
        self.0.partial_cmp(&DBig::ZERO).unwrap_or(Ordering::Equal)
    }
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Scalar for Reference {
    fn from_decimal(d: Decimal) -> Self {
        Self::wrap(DBig::from_parts(IBig::from(d.raw()), -(DIGITS as isize)))
    }

    fn to_decimal(&self) -> Result<Decimal, NumericError> {
        let shifted = &self.0 * DBig::from_parts(IBig::ONE, DIGITS as isize);
        let raw = shifted.to_int().value();
        i128::try_from(raw)
            .map(Decimal::from_raw)
            .map_err(|_| NumericError::Overflow("to_decimal"))
    }

    fn from_int(v: i64) -> Self {
        Self::wrap(DBig::from(v))
    }

    fn add(&self, rhs: &Self) -> Result<Self, NumericError> {
        Ok(Self::wrap(&self.0 + &rhs.0))
    }

    fn sub(&self, rhs: &Self) -> Result<Self, NumericError> {
        Ok(Self::wrap(&self.0 - &rhs.0))
    }

    fn mul(&self, rhs: &Self) -> Result<Self, NumericError> {
        Ok(Self::wrap(&self.0 * &rhs.0))
    }

    fn div(&self, rhs: &Self) -> Result<Self, NumericError> {
        if rhs.signum() == Ordering::Equal {
            return Err(NumericError::DivisionByZero);
        }
        Ok(Self::wrap(&self.0 / &rhs.0))
    }

    fn neg(&self) -> Result<Self, NumericError> {
        Ok(Reference(-self.0.clone()))
    }

    fn ln(&self) -> Result<Self, NumericError> {
        if self.signum() != Ordering::Greater {
            return Err(NumericError::Domain(format!("ln of non-positive value {self:?}")));
        }
        Ok(Self::wrap(self.0.ln()))
    }

    fn exp(&self) -> Result<Self, NumericError> {
        Ok(Self::wrap(self.0.exp()))
    }

    fn pow(&self, exponent: &Self) -> Result<Self, NumericError> {
        if self.signum() == Ordering::Less || self.0 > DBig::ONE {
            return Err(NumericError::Domain(format!("pow base {self:?} outside [0, 1]")));
        }
        if exponent.signum() != Ordering::Greater {
            return Err(NumericError::Domain(format!(
                "pow exponent {exponent:?} must be positive"
            )));
        }
        if self.signum() == Ordering::Equal {
            return Ok(Self::zero());
        }
        Ok(Self::wrap((&exponent.0 * self.0.ln()).exp()))
    }
}
