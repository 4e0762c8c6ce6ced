//! Token amounts, ticks, and exact prices.
//!
//! Every token uses six fixed decimal places; an [`Amount`] is a count of
//! minimal units. Prices are exact rationals and never touch floating point.

use std::fmt;
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Simulation time step.
pub type Tick = u64;

/// Exact price or ratio.
pub type Price = BigRational;

pub const DECIMALS: u32 = 6;

/// Minimal units in one whole token.
pub const UNIT: u64 = 1_000_000;

/// Basis-point denominator.
pub const BPS: u64 = 10_000;

/// Unsigned quantity of a token in minimal units.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const MAX: Amount = Amount(u64::MAX);

    pub const fn new(minimal_units: u64) -> Self {
        Amount(minimal_units)
    }

    /// Whole tokens, scaled by [`UNIT`]. Panics on overflow; intended for
    /// constants and tests.
    pub const fn tokens(whole: u64) -> Self {
        match whole.checked_mul(UNIT) {
            Some(v) => Amount(v),
            None => panic!("token amount overflows u64"),
        }
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    pub fn as_u128(self) -> u128 {
        u128::from(self.0)
    }

    /// Narrow a wide intermediate back to an amount.
    pub fn try_from_u128(v: u128) -> Option<Amount> {
        u64::try_from(v).ok().map(Amount)
    }

    pub fn to_ratio(self) -> Price {
        BigRational::from_integer(BigInt::from(self.0))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount(v)
    }
}

impl<'a> Sum<&'a Amount> for Option<Amount> {
    fn sum<I: Iterator<Item = &'a Amount>>(mut iter: I) -> Self {
        iter.try_fold(Amount::ZERO, |acc, a| acc.checked_add(*a))
    }
}

/// Parse a price written as an integer (`"4"`), a fraction (`"1/4"`), or a
/// terminating decimal (`"2.5"`). The result must be strictly positive.
pub fn parse_price(text: &str) -> Result<Price, String> {
    let text = text.trim();
    let value = if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| format!("bad numerator in {text:?}"))?;
        let den: BigInt = den.trim().parse().map_err(|_| format!("bad denominator in {text:?}"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        BigRational::new(num, den)
    } else if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal {text:?}"));
        }
        let digits: BigInt = format!("{whole}{frac}")
            .parse()
            .map_err(|_| format!("bad decimal {text:?}"))?;
        let scale = num_traits::pow(BigInt::from(10u8), frac.len());
        BigRational::new(digits, scale)
    } else {
        let n: BigInt = text.parse().map_err(|_| format!("bad price {text:?}"))?;
        BigRational::from_integer(n)
    };
    if !value.is_positive() {
        return Err(format!("price must be positive, got {text:?}"));
    }
    Ok(value)
}

/// Canonical text form of a rational: `n` when integral, otherwise `n/d`
/// in lowest terms.
pub fn format_ratio(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio(num: u128, den: u128) -> Price {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_price_forms() {
        assert_eq!(parse_price("4").unwrap(), ratio(4, 1));
        assert_eq!(parse_price("1/4").unwrap(), ratio(1, 4));
        assert_eq!(parse_price("2.5").unwrap(), ratio(5, 2));
        assert_eq!(parse_price(" 0.125 ").unwrap(), ratio(1, 8));
        assert!(parse_price("0").is_err());
        assert!(parse_price("-1").is_err());
        assert!(parse_price("1/0").is_err());
        assert!(parse_price("abc").is_err());
        assert!(parse_price("1.").is_err());
    }

    #[test]
    fn ratio_formatting_is_reduced() {
        assert_eq!(format_ratio(&ratio(8, 2)), "4");
        assert_eq!(format_ratio(&ratio(6, 8)), "3/4");
    }

    #[test]
    fn token_scaling() {
        assert_eq!(Amount::tokens(500), Amount(500_000000));
        assert_eq!(Amount(3).checked_sub(Amount(4)), None);
        assert_eq!(Amount::MAX.checked_add(Amount(1)), None);
    }
}
