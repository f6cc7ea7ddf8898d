//! Exact arithmetic on user-supplied fractions.
//!
//! Expenses like `0.1` are not representable in binary floating point, and
//! `ceil(0.1 * 1000)` computed in `f64` is 101. Fractions are therefore read
//! back through their shortest decimal rendering and scaled with big integers.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::Zero;

/// `value` as an exact ratio `numerator / 10^scale`, using the shortest
/// decimal string that round-trips to `value`.
pub(crate) fn decimal_ratio(value: f64) -> (BigInt, BigUint) {
    debug_assert!(value.is_finite());
    let text = format!("{value}");
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut magnitude = BigUint::zero();
    for b in int_part.bytes().chain(frac_part.bytes()) {
        magnitude = magnitude * 10u32 + u32::from(b - b'0');
    }
    let denominator = BigUint::from(10u32).pow(frac_part.len() as u32);
    let sign = if magnitude.is_zero() {
        Sign::NoSign
    } else if negative {
        Sign::Minus
    } else {
        Sign::Plus
    };
    (BigInt::from_biguint(sign, magnitude), denominator)
}

/// `ceil(fraction * count)` for a non-negative `fraction`.
pub(crate) fn ceil_scaled(count: &BigUint, fraction: f64) -> BigUint {
    let (num, den) = decimal_ratio(fraction);
    let num = num.to_biguint().unwrap_or_default();
    (count * num).div_ceil(&den)
}

/// Nearest integer to `base + fraction * span`, exact `.5` ties rounded down.
pub(crate) fn round_half_down_affine(base: u64, fraction: f64, span: u64) -> BigInt {
    let (num, den) = decimal_ratio(fraction);
    let den = BigInt::from(den);
    // ceil(base + num*span/den - 1/2) == ceil((2*base*den + 2*num*span - den) / (2*den))
    let two = BigInt::from(2);
    let top = &two * BigInt::from(base) * &den + &two * num * BigInt::from(span) - &den;
    top.div_ceil(&(two * den))
}

pub(crate) fn biguint_to_u64_saturating(value: &BigUint) -> u64 {
    u64::try_from(value).unwrap_or(u64::MAX)
}
