//! Closed-form arbitrage against an external price.
//!
//! For a pool with wrapped reserve `x`, counter reserve `y`, fee fraction
//! `φ` and external price `p` (counter per wrapped), the no-arbitrage band
//! is `spot / p ∈ [1 - φ, 1 / (1 - φ)]`: buying is profitable only below it
//! and selling only above it. Outside the band the optimal input moves the
//! fee-adjusted marginal price onto `p`.

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

use crate::amm::AmmError;
use crate::amount::{Amount, Price, BPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArbDirection {
    None,
    /// Pay the counter token, receive wrapped.
    BuyWrapped,
    /// Pay wrapped, receive the counter token.
    SellWrapped,
}

fn parts(p: &Price) -> (BigUint, BigUint) {
    assert!(p > &Price::zero(), "external price must be positive");
    let n = p.numer().to_biguint().expect("positive");
    let d = p.denom().to_biguint().expect("positive");
    (n, d)
}

/// `spot / p_ext >= 1 - φ` for spot `y / x`.
pub fn at_or_above_lower_edge(x: Amount, y: Amount, fee_bps: u32, p_ext: &Price) -> bool {
    let (a, b) = parts(p_ext);
    let keep = BigUint::from(BPS - u64::from(fee_bps));
    BigUint::from(y.0) * &b * BigUint::from(BPS) >= BigUint::from(x.0) * &a * keep
}

/// `spot / p_ext <= 1 / (1 - φ)` for spot `y / x`.
pub fn at_or_below_upper_edge(x: Amount, y: Amount, fee_bps: u32, p_ext: &Price) -> bool {
    let (a, b) = parts(p_ext);
    let keep = BigUint::from(BPS - u64::from(fee_bps));
    BigUint::from(y.0) * &b * keep <= BigUint::from(x.0) * &a * BigUint::from(BPS)
}

/// Whether spot `y / x` lies inside the no-arbitrage band around `p_ext`.
pub fn within_fee_band(x: Amount, y: Amount, fee_bps: u32, p_ext: &Price) -> bool {
    at_or_above_lower_edge(x, y, fee_bps, p_ext) && at_or_below_upper_edge(x, y, fee_bps, p_ext)
}

fn saturate(v: BigUint) -> Amount {
    Amount(v.to_u64().unwrap_or(u64::MAX))
}

/// Input that moves the pool's fee-adjusted marginal price to `p_ext`.
///
/// Buying pays `floor((isqrt(x·y·(1-φ)·p) - y) / (1-φ))` of the counter
/// token; selling pays `floor((isqrt(x·y·(1-φ)/p) - x) / (1-φ))` wrapped.
/// Inside the fee band, or when the rounded amount is zero, the result is
/// `(None, 0)`.
pub fn optimal_arb_input(x: Amount, y: Amount, fee_bps: u32, p_ext: &Price) -> Result<(ArbDirection, Amount), AmmError> {
    if x.is_zero() || y.is_zero() {
        return Err(AmmError::EmptyPool);
    }
    if fee_bps > crate::amm::MAX_FEE_BPS {
        return Err(AmmError::FeeTooHigh(fee_bps));
    }
    let none = Ok((ArbDirection::None, Amount::ZERO));
    let (a, b) = parts(p_ext);
    let bps = BigUint::from(BPS);
    let keep = BigUint::from(BPS - u64::from(fee_bps));
    let k = BigUint::from(x.0) * BigUint::from(y.0);
    let (direction, target, base) = if !at_or_above_lower_edge(x, y, fee_bps, p_ext) {
        let s = (&k * &keep * &a / (&bps * &b)).sqrt();
        (ArbDirection::BuyWrapped, s, BigUint::from(y.0))
    } else if !at_or_below_upper_edge(x, y, fee_bps, p_ext) {
        let s = (&k * &keep * &b / (&bps * &a)).sqrt();
        (ArbDirection::SellWrapped, s, BigUint::from(x.0))
    } else {
        return none;
    };
    if target <= base {
        return none;
    }
    let amount = (target - base) * bps / keep;
    if amount.is_zero() {
        return none;
    }
    Ok((direction, saturate(amount)))
}

/// Profit of paying `amount` in `direction`, valued at `p_ext`, on the exact
/// fee-adjusted curve without integer rounding. Positive for the closed-form
/// input whenever the pool is outside the fee band.
pub fn curve_profit(x: Amount, y: Amount, fee_bps: u32, p_ext: &Price, direction: ArbDirection, amount: Amount) -> Price {
    let keep = Price::new(BigInt::from(BPS - u64::from(fee_bps)), BigInt::from(BPS));
    let effective = amount.to_ratio() * keep;
    match direction {
        ArbDirection::None => Price::zero(),
        ArbDirection::BuyWrapped => {
            let out = x.to_ratio() * &effective / (y.to_ratio() + &effective);
            out * p_ext - amount.to_ratio()
        }
        ArbDirection::SellWrapped => {
            let out = y.to_ratio() * &effective / (x.to_ratio() + &effective);
            out - amount.to_ratio() * p_ext
        }
    }
}
