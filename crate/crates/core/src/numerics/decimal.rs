//! Signed fixed-point decimal with 18 fractional digits.
//!
//! The representation is a single `i128` holding `value * 10^18`, the same
//! convention lending contracts use for WAD-scaled quantities. All arithmetic
//! is checked; overflow is reported instead of wrapping, and every discarded
//! remainder is rounded half away from zero.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ethnum::I256;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use super::NumericError;

/// Number of fractional decimal digits carried by [`Decimal`].
pub const DIGITS: u32 = 18;

/// `10^18`, the raw value of `1.0`.
pub const SCALE: i128 = 1_000_000_000_000_000_000;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(i128);

impl Decimal {
    pub const ZERO: Decimal = Decimal(0);
    pub const ONE: Decimal = Decimal(SCALE);
    pub const TWO: Decimal = Decimal(2 * SCALE);
    pub const HALF: Decimal = Decimal(SCALE / 2);
    pub const MAX: Decimal = Decimal(i128::MAX);
    pub const MIN: Decimal = Decimal(i128::MIN + 1);

    /// Wraps a raw integer already scaled by `10^18`.
    pub const fn from_raw(raw: i128) -> Self {
        Decimal(raw)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub const fn from_int(v: i64) -> Self {
        // |i64| * 10^18 < 2^127, never overflows.
        Decimal(v as i128 * SCALE)
    }

    /// Builds `mantissa * 10^-scale` exactly, e.g. `from_parts(55, 3) == 0.055`.
    pub fn from_parts(mantissa: i128, scale: u32) -> Result<Self, NumericError> {
        if scale > DIGITS {
            return Err(NumericError::Domain(format!(
                "scale {scale} exceeds {DIGITS} fractional digits"
            )));
        }
        let factor = 10i128.pow(DIGITS - scale);
        mantissa
            .checked_mul(factor)
            .map(Decimal)
            .ok_or(NumericError::Overflow("from_parts"))
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub const fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn abs(self) -> Self {
        Decimal(self.0.abs())
    }

    pub fn checked_neg(self) -> Result<Self, NumericError> {
        self.0.checked_neg().map(Decimal).ok_or(NumericError::Overflow("neg"))
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, NumericError> {
        self.0.checked_add(rhs.0).map(Decimal).ok_or(NumericError::Overflow("add"))
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, NumericError> {
        self.0.checked_sub(rhs.0).map(Decimal).ok_or(NumericError::Overflow("sub"))
    }

    /// `round(a * b / 10^18)`, rounding half away from zero.
    pub fn checked_mul(self, rhs: Self) -> Result<Self, NumericError> {
        if let Some(product) = self.0.checked_mul(rhs.0) {
            return Ok(Decimal(round_div_i128(product, SCALE)));
        }
        let product = I256::new(self.0) * I256::new(rhs.0);
        narrow(round_div_wide(product, I256::new(SCALE)), "mul")
    }

    /// `round(a * 10^18 / b)`, rounding half away from zero.
    pub fn checked_div(self, rhs: Self) -> Result<Self, NumericError> {
        if rhs.0 == 0 {
            return Err(NumericError::DivisionByZero);
        }
        if let Some(num) = self.0.checked_mul(SCALE) {
            // i128::MIN / -1 is the only quotient that can overflow here.
            if !(num == i128::MIN && rhs.0 == -1) {
                return Ok(Decimal(round_div_i128(num, rhs.0)));
            }
        }
        let num = I256::new(self.0) * I256::new(SCALE);
        narrow(round_div_wide(num, I256::new(rhs.0)), "div")
    }

    /// Multiplies by a whole number of units (e.g. seconds) without rounding.
    pub fn checked_mul_int(self, k: i128) -> Result<Self, NumericError> {
        self.0.checked_mul(k).map(Decimal).ok_or(NumericError::Overflow("mul_int"))
    }

    /// Divides by a whole number, rounding half away from zero.
    pub fn checked_div_int(self, k: i128) -> Result<Self, NumericError> {
        if k == 0 {
            return Err(NumericError::DivisionByZero);
        }
        Ok(Decimal(round_div_i128(self.0, k)))
    }

    /// Natural logarithm; `self` must be strictly positive.
    pub fn ln(self) -> Result<Self, NumericError> {
        if self.0 <= 0 {
            return Err(NumericError::Domain(format!("ln of non-positive value {self}")));
        }
        let wide = super::transcendental::ln_wide(I256::new(self.0) * I256::new(SCALE));
        narrow(super::transcendental::to_narrow(wide), "ln")
    }

    pub fn exp(self) -> Result<Self, NumericError> {
        let wide = super::transcendental::exp_wide(I256::new(self.0) * I256::new(SCALE))?;
        narrow(super::transcendental::to_narrow(wide), "exp")
    }

    /// `ln(self) / ln(base)` with both logarithms kept at 36 digits before
    /// the division, so exact powers come out exact.
    pub fn log(self, base: Self) -> Result<Self, NumericError> {
        if self.0 <= 0 || base.0 <= 0 || base == Decimal::ONE {
            return Err(NumericError::Domain(format!("log of {self} in base {base}")));
        }
        let wide = |v: Decimal| super::transcendental::ln_wide(I256::new(v.0) * I256::new(SCALE));
        narrow(round_div_wide(wide(self) * I256::new(SCALE), wide(base)), "log")
    }

    /// `base^exponent` for `base` in `[0, 1]` and `exponent > 0`, evaluated as
    /// `exp(exponent * ln(base))` at 36 internal digits. `pow(0, n)` is `0`.
    pub fn pow(self, exponent: Self) -> Result<Self, NumericError> {
        check_pow_domain(self, exponent)?;
        if self.is_zero() {
            return Ok(Decimal::ZERO);
        }
        if self == Decimal::ONE {
            return Ok(Decimal::ONE);
        }
        let ln_base = super::transcendental::ln_wide(I256::new(self.0) * I256::new(SCALE));
        // ln_base carries 36 digits and exponent 18: rescale the product back to 36.
        let arg = round_div_wide(ln_base * I256::new(exponent.0), I256::new(SCALE));
        let wide = super::transcendental::exp_wide(arg)?;
        narrow(super::transcendental::to_narrow(wide), "pow")
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other { self } else { other }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other { self } else { other }
    }

    pub fn clamp(self, lo: Self, hi: Self) -> Self {
        self.max(lo).min(hi)
    }
}

pub(crate) fn check_pow_domain(base: Decimal, exponent: Decimal) -> Result<(), NumericError> {
    if base.is_negative() || base > Decimal::ONE {
        return Err(NumericError::Domain(format!("pow base {base} outside [0, 1]")));
    }
    if !exponent.is_positive() {
        return Err(NumericError::Domain(format!("pow exponent {exponent} must be positive")));
    }
    Ok(())
}

fn narrow(v: I256, op: &'static str) -> Result<Decimal, NumericError> {
    i128::try_from(v).map(Decimal).map_err(|_| NumericError::Overflow(op))
}

/// Integer division rounding half away from zero. `den` must be non-zero.
pub(crate) fn round_div_i128(num: i128, den: i128) -> i128 {
    let q = num / den;
    let r = num % den;
    if r != 0 && r.unsigned_abs() >= den.unsigned_abs() - r.unsigned_abs() {
        if (num < 0) == (den < 0) { q + 1 } else { q - 1 }
    } else {
        q
    }
}

pub(crate) fn round_div_wide(num: I256, den: I256) -> I256 {
    let q = num / den;
    let r = num % den;
    if r != I256::ZERO && r.unsigned_abs() >= den.unsigned_abs() - r.unsigned_abs() {
        if num.is_negative() == den.is_negative() { q + 1 } else { q - 1 }
    } else {
        q
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let scale = SCALE as u128;
        write!(f, "{sign}{}.{:018}", abs / scale, abs % scale)
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Decimal {
    type Err = NumericError;

    /// Accepts `[+-]digits[.digits]` with at most 18 fractional digits; the
    /// canonical form written by `Display` always parses back exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NumericError::Parse(s.to_string());
        let (negative, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) || frac_part.len() > DIGITS as usize {
            return Err(bad());
        }
        let mut raw: i128 = 0;
        for b in int_part.bytes() {
            raw = raw
                .checked_mul(10)
                .and_then(|r| r.checked_add(i128::from(b - b'0')))
                .ok_or_else(bad)?;
        }
        raw = raw.checked_mul(SCALE).ok_or_else(bad)?;
        let mut frac: i128 = 0;
        for b in frac_part.bytes() {
            frac = frac * 10 + i128::from(b - b'0');
        }
        frac *= 10i128.pow(DIGITS - frac_part.len() as u32);
        raw = raw.checked_add(frac).ok_or_else(bad)?;
        Ok(Decimal(if negative { -raw } else { raw }))
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct DecimalVisitor;

        impl Visitor<'_> for DecimalVisitor {
            type Value = Decimal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string such as \"0.05\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_str(DecimalVisitor)
    }
}

impl PartialEq<i64> for Decimal {
    fn eq(&self, other: &i64) -> bool {
        *self == Decimal::from_int(*other)
    }
}

impl PartialOrd<i64> for Decimal {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Decimal::from_int(*other)))
    }
}
