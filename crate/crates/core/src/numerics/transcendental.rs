//! `ln` and `exp` on 256-bit integers carrying 36 fractional digits.
//!
//! Both use binary argument reduction followed by a short series, so the
//! working error stays around `1e-34` absolute, well below the `1e-18`
//! resolution of [`super::Decimal`].

use ethnum::I256;

use super::decimal::round_div_wide;
use super::NumericError;

const SCALE_36: I256 = I256::new(1_000_000_000_000_000_000_000_000_000_000_000_000);
const LN2_36: I256 = I256::new(693_147_180_559_945_309_417_232_121_458_176_568);
const SQRT2_36: I256 = I256::new(1_414_213_562_373_095_048_801_688_724_209_698_079);

/// Largest binary exponent whose result can still fit a 1e18-scaled `i128`.
const MAX_EXP_SHIFT: i128 = 70;
/// Below this the result is under `1e-39` and rounds to zero.
const MIN_EXP_SHIFT: i128 = -140;

/// `ln(x)` for `x > 0`, both at 36 fractional digits.
pub(crate) fn ln_wide(x: I256) -> I256 {
    debug_assert!(x > I256::ZERO);
    let mut y = x;
    let mut k: i128 = 0;
    while y >= SCALE_36 * 2 {
        y = round_div_wide(y, I256::new(2));
        k += 1;
    }
    while y < SCALE_36 {
        y *= 2;
        k -= 1;
    }
    if y > SQRT2_36 {
        y = round_div_wide(y, I256::new(2));
        k += 1;
    }
    // ln(y) = 2 atanh(z), z = (y - 1) / (y + 1), |z| <= 0.172
    let z = round_div_wide((y - SCALE_36) * SCALE_36, y + SCALE_36);
    let z2 = round_div_wide(z * z, SCALE_36);
    let mut sum = z;
    let mut power = z;
    let mut odd: i128 = 1;
    loop {
        power = round_div_wide(power * z2, SCALE_36);
        if power == I256::ZERO {
            break;
        }
        odd += 2;
        sum += round_div_wide(power, I256::new(odd));
    }
    sum * 2 + LN2_36 * I256::new(k)
}

/// `exp(x)` at 36 fractional digits.
pub(crate) fn exp_wide(x: I256) -> Result<I256, NumericError> {
    let k = round_div_wide(x, LN2_36);
    if k > I256::new(MAX_EXP_SHIFT) {
        return Err(NumericError::Overflow("exp"));
    }
    if k < I256::new(MIN_EXP_SHIFT) {
        return Ok(I256::ZERO);
    }
    let k = k.as_i128();
    // |r| <= ln(2) / 2
    let r = x - LN2_36 * I256::new(k);
    let mut sum = SCALE_36;
    let mut term = SCALE_36;
    let mut i: i128 = 1;
    loop {
        term = round_div_wide(term * r, SCALE_36 * I256::new(i));
        if term == I256::ZERO {
            break;
        }
        sum += term;
        i += 1;
    }
    Ok(if k >= 0 {
        sum << (k as u32)
    } else {
        round_div_wide(sum, I256::ONE << ((-k) as u32))
    })
}

/// Rounds a 36-digit value to the 18-digit raw scale.
pub(crate) fn to_narrow(x: I256) -> I256 {
    round_div_wide(x, I256::new(1_000_000_000_000_000_000))
}
