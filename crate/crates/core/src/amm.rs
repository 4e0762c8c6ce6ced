//! Constant-product pools pairing a wrapped token with a destination-chain
//! origin token.
//!
//! Rounding always favors the pool: swap output rounds the post-trade
//! reserve up, deposits take the counter-token rounded up, and share minting
//! and withdrawals floor. The fee stays in the reserves, so `k` only grows.
//!
//! There is no minimum-liquidity lock on the first deposit; a sole provider
//! withdrawing everything returns the pool to the empty state.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Roots;
use thiserror::Error;

use crate::amount::{ratio, Amount, Price, BPS};
use crate::ledger::{AccountId, ChainId, Ledger, LedgerError, TokenId};

pub const MAX_FEE_BPS: u32 = 1_000;
pub const DEFAULT_FEE_BPS: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PoolId(pub u32);

impl fmt::Display for PoolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pool#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmmError {
    #[error("a pool for this pair already exists on the chain")]
    DuplicatePair,
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("fee of {0} bps exceeds the {MAX_FEE_BPS} bps cap")]
    FeeTooHigh(u32),
    #[error("pool tokens must be distinct")]
    SameToken,
    #[error("deposit too small to mint a share")]
    ZeroShares,
    #[error("account holds {held} shares, tried to remove {requested}")]
    InsufficientShares { held: u64, requested: u64 },
    #[error("output {out} below minimum {min_out}")]
    SlippageExceeded { out: Amount, min_out: Amount },
    #[error("pool has no liquidity")]
    EmptyPool,
    #[error("pool already initialized")]
    PoolNotEmpty,
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("{0} is not part of this pool")]
    NotInPool(TokenId),
    #[error("arithmetic overflow")]
    Overflow,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolConfig {
    pub label: String,
    pub chain: ChainId,
    pub token_w: TokenId,
    pub token_o: TokenId,
    pub fee_bps: u32,
    pub weight: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pool {
    pub label: String,
    pub chain: ChainId,
    pub token_w: TokenId,
    pub token_o: TokenId,
    pub fee_bps: u32,
    pub weight: u64,
    /// Ledger account holding the reserves.
    pub account: AccountId,
    reserve_w: Amount,
    reserve_o: Amount,
    total_shares: u64,
    shares: BTreeMap<AccountId, u64>,
}

impl Pool {
    pub fn reserves(&self) -> (Amount, Amount) {
        (self.reserve_w, self.reserve_o)
    }

    pub fn total_shares(&self) -> u64 {
        self.total_shares
    }

    pub fn shares_of(&self, account: AccountId) -> u64 {
        self.shares.get(&account).copied().unwrap_or(0)
    }

    pub fn shareholders(&self) -> impl Iterator<Item = (AccountId, u64)> + '_ {
        self.shares.iter().map(|(a, s)| (*a, *s))
    }

    pub fn is_empty(&self) -> bool {
        self.total_shares == 0
    }

    /// `(reserve_in, reserve_out)` for a trade paying `token_in`.
    pub fn orient(&self, token_in: TokenId) -> Result<(Amount, Amount), AmmError> {
        if token_in == self.token_w {
            Ok((self.reserve_w, self.reserve_o))
        } else if token_in == self.token_o {
            Ok((self.reserve_o, self.reserve_w))
        } else {
            Err(AmmError::NotInPool(token_in))
        }
    }

    /// Price of the wrapped side in units of the other side.
    pub fn spot_price(&self) -> Result<Price, AmmError> {
        if self.is_empty() {
            return Err(AmmError::EmptyPool);
        }
        Ok(ratio(self.reserve_o.as_u128(), self.reserve_w.as_u128()))
    }

    /// Price impact of selling `amount_in` of the wrapped side, excluding
    /// the fee: `1 - out / (amount_in * spot)` where `out` is the exact
    /// rational output of the fee-free curve.
    pub fn quote_slippage(&self, amount_in: Amount) -> Result<Price, AmmError> {
        let spot = self.spot_price()?;
        if amount_in.is_zero() {
            return Ok(ratio(0, 1));
        }
        let (x, y) = (self.reserve_w.as_u128(), self.reserve_o.as_u128());
        let dx = amount_in.as_u128();
        let out = ratio(y, 1) * ratio(dx, x + dx);
        let at_spot = amount_in.to_ratio() * spot;
        Ok(ratio(1, 1) - out / at_spot)
    }

    fn set_shares(&mut self, account: AccountId, value: u64) {
        if value == 0 {
            self.shares.remove(&account);
        } else {
            self.shares.insert(account, value);
        }
    }
}

/// Constant-product output for paying `amount_in` into a pool with
/// `reserve_in`/`reserve_out`: `y - ceil(x*y / (x + floor(amount_in * (1 - fee))))`.
pub fn swap_output(reserve_in: Amount, reserve_out: Amount, fee_bps: u32, amount_in: Amount) -> Amount {
    let x = reserve_in.as_u128();
    let y = reserve_out.as_u128();
    let effective = amount_in.as_u128() * (u128::from(BPS) - u128::from(fee_bps)) / u128::from(BPS);
    let denom = x + effective;
    if denom == 0 {
        return Amount::ZERO;
    }
    let k = x * y;
    let remaining = k.div_ceil(denom);
    // remaining <= y because denom >= x
    Amount((y - remaining) as u64)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Amm {
    pools: Vec<Pool>,
}

impl Amm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: PoolId) -> Result<&Pool, AmmError> {
        self.pools
            .get(id.0 as usize)
            .ok_or_else(|| AmmError::UnknownEntity(id.to_string()))
    }

    fn get_mut(&mut self, id: PoolId) -> Result<&mut Pool, AmmError> {
        self.pools
            .get_mut(id.0 as usize)
            .ok_or_else(|| AmmError::UnknownEntity(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (PoolId, &Pool)> {
        self.pools.iter().enumerate().map(|(i, p)| (PoolId(i as u32), p))
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    pub fn find(&self, label: &str) -> Option<PoolId> {
        self.pools
            .iter()
            .position(|p| p.label == label)
            .map(|i| PoolId(i as u32))
    }

    pub(crate) fn set_fee(&mut self, id: PoolId, fee_bps: u32) -> Result<(), AmmError> {
        if fee_bps > MAX_FEE_BPS {
            return Err(AmmError::FeeTooHigh(fee_bps));
        }
        self.get_mut(id)?.fee_bps = fee_bps;
        Ok(())
    }

    pub(crate) fn set_weight(&mut self, id: PoolId, weight: u64) -> Result<(), AmmError> {
        self.get_mut(id)?.weight = weight;
        Ok(())
    }

    pub fn check_config(&self, ledger: &Ledger, cfg: &PoolConfig) -> Result<(), AmmError> {
        if cfg.fee_bps > MAX_FEE_BPS {
            return Err(AmmError::FeeTooHigh(cfg.fee_bps));
        }
        if cfg.token_w == cfg.token_o {
            return Err(AmmError::SameToken);
        }
        ledger
            .chain_name(cfg.chain)
            .map_err(|e| AmmError::UnknownEntity(e.to_string()))?;
        for token in [cfg.token_w, cfg.token_o] {
            let info = ledger
                .token(token)
                .map_err(|e| AmmError::UnknownEntity(e.to_string()))?;
            if info.home_chain != cfg.chain {
                return Err(AmmError::UnknownEntity(format!(
                    "{} is not registered on {}",
                    info.symbol, cfg.chain
                )));
            }
        }
        let dup = self.pools.iter().any(|p| {
            p.chain == cfg.chain
                && ((p.token_w == cfg.token_w && p.token_o == cfg.token_o)
                    || (p.token_w == cfg.token_o && p.token_o == cfg.token_w))
        });
        if dup {
            return Err(AmmError::DuplicatePair);
        }
        if self.find(&cfg.label).is_some() {
            return Err(AmmError::UnknownEntity(format!("pool label {:?} already used", cfg.label)));
        }
        Ok(())
    }

    pub fn create_pool(&mut self, ledger: &mut Ledger, cfg: PoolConfig) -> Result<PoolId, AmmError> {
        self.check_config(ledger, &cfg)?;
        let id = PoolId(self.pools.len() as u32);
        let account = ledger.account(&format!("pool:{}", cfg.label));
        self.pools.push(Pool {
            label: cfg.label,
            chain: cfg.chain,
            token_w: cfg.token_w,
            token_o: cfg.token_o,
            fee_bps: cfg.fee_bps,
            weight: cfg.weight,
            account,
            reserve_w: Amount::ZERO,
            reserve_o: Amount::ZERO,
            total_shares: 0,
            shares: BTreeMap::new(),
        });
        Ok(id)
    }

    fn require(ledger: &Ledger, token: TokenId, account: AccountId, amount: Amount) -> Result<(), AmmError> {
        let available = ledger.balance(token, account);
        if available < amount {
            return Err(LedgerError::InsufficientBalance {
                token,
                account,
                available,
                required: amount,
            }
            .into());
        }
        Ok(())
    }

    /// First deposit into an empty pool; the caller fixes the opening price.
    /// Mints `floor(sqrt(amount_w * amount_o))` shares.
    pub fn add_initial_liquidity(
        &mut self,
        ledger: &mut Ledger,
        id: PoolId,
        account: AccountId,
        amount_w: Amount,
        amount_o: Amount,
    ) -> Result<u64, AmmError> {
        let pool = self.get(id)?;
        if !pool.is_empty() {
            return Err(AmmError::PoolNotEmpty);
        }
        ledger.account_label(account)?;
        let shares = (amount_w.as_u128() * amount_o.as_u128()).sqrt() as u64;
        if shares == 0 {
            return Err(AmmError::ZeroShares);
        }
        Self::require(ledger, pool.token_w, account, amount_w)?;
        Self::require(ledger, pool.token_o, account, amount_o)?;
        let (chain, tw, to, pa) = (pool.chain, pool.token_w, pool.token_o, pool.account);
        ledger.transfer(chain, tw, account, pa, amount_w)?;
        ledger.transfer(chain, to, account, pa, amount_o)?;
        let pool = self.get_mut(id)?;
        pool.reserve_w = amount_w;
        pool.reserve_o = amount_o;
        pool.total_shares = shares;
        pool.set_shares(account, shares);
        Ok(shares)
    }

    /// Deposit `amount_w` at the current pool price. Returns
    /// `(shares_minted, amount_o_taken)`.
    pub fn add_liquidity(
        &mut self,
        ledger: &mut Ledger,
        id: PoolId,
        account: AccountId,
        amount_w: Amount,
    ) -> Result<(u64, Amount), AmmError> {
        let pool = self.get(id)?;
        if pool.is_empty() {
            return Err(AmmError::EmptyPool);
        }
        ledger.account_label(account)?;
        let (rw, ro) = (pool.reserve_w.as_u128(), pool.reserve_o.as_u128());
        let w = amount_w.as_u128();
        let shares = w * u128::from(pool.total_shares) / rw;
        if shares == 0 {
            return Err(AmmError::ZeroShares);
        }
        let amount_o = Amount::try_from_u128((w * ro).div_ceil(rw)).ok_or(AmmError::Overflow)?;
        let shares = u64::try_from(shares).map_err(|_| AmmError::Overflow)?;
        let new_w = pool.reserve_w.checked_add(amount_w).ok_or(AmmError::Overflow)?;
        let new_o = pool.reserve_o.checked_add(amount_o).ok_or(AmmError::Overflow)?;
        let new_total = pool.total_shares.checked_add(shares).ok_or(AmmError::Overflow)?;
        let held = pool.shares_of(account) + shares;
        Self::require(ledger, pool.token_w, account, amount_w)?;
        Self::require(ledger, pool.token_o, account, amount_o)?;
        let (chain, tw, to, pa) = (pool.chain, pool.token_w, pool.token_o, pool.account);
        ledger.transfer(chain, tw, account, pa, amount_w)?;
        ledger.transfer(chain, to, account, pa, amount_o)?;
        let pool = self.get_mut(id)?;
        pool.reserve_w = new_w;
        pool.reserve_o = new_o;
        pool.total_shares = new_total;
        pool.set_shares(account, held);
        Ok((shares, amount_o))
    }

    /// Burn `shares` for a pro-rata (floored) slice of both reserves.
    pub fn remove_liquidity(
        &mut self,
        ledger: &mut Ledger,
        id: PoolId,
        account: AccountId,
        shares: u64,
    ) -> Result<(Amount, Amount), AmmError> {
        let pool = self.get(id)?;
        let held = pool.shares_of(account);
        if shares > held {
            return Err(AmmError::InsufficientShares { held, requested: shares });
        }
        if shares == 0 {
            return Ok((Amount::ZERO, Amount::ZERO));
        }
        let total = u128::from(pool.total_shares);
        let s = u128::from(shares);
        let out_w = Amount((s * pool.reserve_w.as_u128() / total) as u64);
        let out_o = Amount((s * pool.reserve_o.as_u128() / total) as u64);
        let (chain, tw, to, pa) = (pool.chain, pool.token_w, pool.token_o, pool.account);
        ledger.transfer(chain, tw, pa, account, out_w)?;
        ledger.transfer(chain, to, pa, account, out_o)?;
        let pool = self.get_mut(id)?;
        pool.reserve_w = Amount(pool.reserve_w.0 - out_w.0);
        pool.reserve_o = Amount(pool.reserve_o.0 - out_o.0);
        pool.total_shares -= shares;
        pool.set_shares(account, held - shares);
        Ok((out_w, out_o))
    }

    pub fn swap_exact_in(
        &mut self,
        ledger: &mut Ledger,
        id: PoolId,
        account: AccountId,
        token_in: TokenId,
        amount_in: Amount,
        min_out: Amount,
    ) -> Result<Amount, AmmError> {
        let pool = self.get(id)?;
        let (x, y) = pool.orient(token_in)?;
        if amount_in.is_zero() {
            return Err(AmmError::ZeroAmount);
        }
        if pool.is_empty() {
            return Err(AmmError::EmptyPool);
        }
        ledger.account_label(account)?;
        let out = swap_output(x, y, pool.fee_bps, amount_in);
        if out < min_out {
            return Err(AmmError::SlippageExceeded { out, min_out });
        }
        let new_in = x.checked_add(amount_in).ok_or(AmmError::Overflow)?;
        let token_out = if token_in == pool.token_w { pool.token_o } else { pool.token_w };
        Self::require(ledger, token_in, account, amount_in)?;
        if ledger.balance(token_out, account).checked_add(out).is_none() {
            return Err(AmmError::Overflow);
        }
        let (chain, pa, is_w) = (pool.chain, pool.account, token_in == pool.token_w);
        ledger.transfer(chain, token_in, account, pa, amount_in)?;
        ledger.transfer(chain, token_out, pa, account, out)?;
        let pool = self.get_mut(id)?;
        let new_out = Amount(y.0 - out.0);
        if is_w {
            pool.reserve_w = new_in;
            pool.reserve_o = new_out;
        } else {
            pool.reserve_o = new_in;
            pool.reserve_w = new_out;
        }
        Ok(out)
    }

    pub fn spot_price(&self, id: PoolId) -> Result<Price, AmmError> {
        self.get(id)?.spot_price()
    }

    pub fn quote_slippage(&self, id: PoolId, amount_in: Amount) -> Result<Price, AmmError> {
        self.get(id)?.quote_slippage(amount_in)
    }

    /// Reserve/ledger consistency, share sums, and the all-or-nothing
    /// emptiness rule, for every pool.
    pub fn audit(&self, ledger: &Ledger) -> Result<(), String> {
        for (id, p) in self.iter() {
            let bal_w = ledger.balance(p.token_w, p.account);
            let bal_o = ledger.balance(p.token_o, p.account);
            if (bal_w, bal_o) != (p.reserve_w, p.reserve_o) {
                return Err(format!(
                    "{id} ({}): ledger holds ({bal_w}, {bal_o}) but reserves are ({}, {})",
                    p.label, p.reserve_w, p.reserve_o
                ));
            }
            let sum: u128 = p.shares.values().map(|s| u128::from(*s)).sum();
            if sum != u128::from(p.total_shares) {
                return Err(format!(
                    "{id} ({}): shares sum to {sum} but total is {}",
                    p.label, p.total_shares
                ));
            }
            let flags = [!p.reserve_w.is_zero(), !p.reserve_o.is_zero(), p.total_shares > 0];
            if flags.iter().any(|f| *f != flags[0]) {
                return Err(format!(
                    "{id} ({}): partially initialized (reserves ({}, {}), shares {})",
                    p.label, p.reserve_w, p.reserve_o, p.total_shares
                ));
            }
        }
        Ok(())
    }
}
