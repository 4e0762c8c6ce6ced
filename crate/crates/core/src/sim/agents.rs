//! Scripted market participants. Each agent acts once per tick, in id
//! order, drawing randomness only from its own stream. Agents skip actions
//! they cannot afford; any other protocol error aborts the run.

use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::amm::{swap_output, PoolId};
use crate::amount::{Amount, Price, Tick};
use crate::gateway::GatewayId;
use crate::ledger::AccountId;
use crate::protocol::{Protocol, ProtocolError};

use super::arb::{at_or_above_lower_edge, at_or_below_upper_edge, curve_profit, optimal_arb_input, ArbDirection};
use super::feeds::Feed;

/// Extra single-unit increments tried when rounding leaves an arbitrage
/// short of the fee band.
pub const ARB_NUDGE_LIMIT: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgePolicy {
    Lock,
    Unwrap,
    /// Lock on even ticks, unwrap on odd ticks.
    Alternate,
    /// Lock then unwrap the same amount within one tick.
    RoundTrip,
    /// Lock or unwrap with equal probability.
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Arbitrageur {
        pool: PoolId,
        feed: usize,
        min_profit: Amount,
    },
    RandomTrader {
        pool: PoolId,
        /// Expected trades per tick as `(numerator, denominator)`.
        intensity: (u64, u64),
        max_size: Amount,
    },
    LiquidityProvider {
        pool: PoolId,
        enter_tick: Tick,
        exit_tick: Option<Tick>,
        amount_w: Amount,
        amount_o: Option<Amount>,
        claim_every: Option<u64>,
    },
    Bridger {
        gateway: GatewayId,
        amount: Amount,
        policy: BridgePolicy,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentSpec {
    pub id: u32,
    /// Account label.
    pub label: String,
    pub account: AccountId,
    pub kind: AgentKind,
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub spec: AgentSpec,
    rng: ChaCha8Rng,
    entered_at: Option<Tick>,
    exited: bool,
}

fn bal(p: &Protocol, token: crate::ledger::TokenId, account: AccountId) -> Amount {
    p.ledger()
        .token(token)
        .and_then(|t| p.ledger().balance_of(t.home_chain, token, account))
        .unwrap_or_default()
}

impl Agent {
    pub fn new(spec: AgentSpec, rng: ChaCha8Rng) -> Self {
        Agent { spec, rng, entered_at: None, exited: false }
    }

    pub fn act(&mut self, p: &mut Protocol, feeds: &mut [Feed], now: Tick) -> Result<(), ProtocolError> {
        match self.spec.kind.clone() {
            AgentKind::Arbitrageur { pool, feed, min_profit } => {
                let price = feeds[feed].price_at(now);
                self.arbitrage(p, pool, &price, min_profit)
            }
            AgentKind::RandomTrader { pool, intensity, max_size } => self.trade(p, pool, intensity, max_size),
            AgentKind::LiquidityProvider { pool, enter_tick, exit_tick, amount_w, amount_o, claim_every } => {
                self.provide(p, pool, now, enter_tick, exit_tick, amount_w, amount_o, claim_every)
            }
            AgentKind::Bridger { gateway, amount, policy } => {
                let lock = match policy {
                    BridgePolicy::Lock => true,
                    BridgePolicy::Unwrap => false,
                    BridgePolicy::Alternate => now.is_multiple_of(2),
                    BridgePolicy::Random => self.rng.gen::<bool>(),
                    BridgePolicy::RoundTrip => {
                        self.bridge_lock(p, gateway, amount, now)?;
                        return self.bridge_unwrap(p, gateway, amount, now);
                    }
                };
                if lock {
                    self.bridge_lock(p, gateway, amount, now)
                } else {
                    self.bridge_unwrap(p, gateway, amount, now)
                }
            }
        }
    }

    fn arbitrage(&mut self, p: &mut Protocol, pid: PoolId, price: &Price, min_profit: Amount) -> Result<(), ProtocolError> {
        let pool = p.amm().get(pid)?;
        if pool.is_empty() {
            return Ok(());
        }
        let (x, y) = pool.reserves();
        let fee = pool.fee_bps;
        let (direction, mut amount) = optimal_arb_input(x, y, fee, price)?;
        let (token_in, reserve_in, reserve_out) = match direction {
            ArbDirection::None => return Ok(()),
            ArbDirection::BuyWrapped => (pool.token_o, y, x),
            ArbDirection::SellWrapped => (pool.token_w, x, y),
        };
        // judged before integer rounding: closing a gap just outside the
        // band can cost a few minimal units of rounding
        let profit = curve_profit(x, y, fee, price, direction, amount);
        if profit <= Price::zero() || profit < min_profit.to_ratio() {
            return Ok(());
        }
        let available = bal(p, token_in, self.spec.account);
        amount = amount.min(available);
        if amount.is_zero() {
            return Ok(());
        }
        let post = |amount: Amount| {
            let out = swap_output(reserve_in, reserve_out, fee, amount);
            let r_in = Amount(reserve_in.0.saturating_add(amount.0));
            let r_out = Amount(reserve_out.0 - out.0);
            let reached = match direction {
                ArbDirection::BuyWrapped => at_or_above_lower_edge(r_out, r_in, fee, price),
                _ => at_or_below_upper_edge(r_in, r_out, fee, price),
            };
            (out, reached)
        };
        let (mut out, mut reached) = post(amount);
        let mut nudges = 0;
        while !reached && nudges < ARB_NUDGE_LIMIT && amount < available {
            amount = Amount(amount.0 + 1);
            (out, reached) = post(amount);
            nudges += 1;
        }
        p.swap_exact_in(pid, self.spec.account, token_in, amount, out)?;
        Ok(())
    }

    fn trade(&mut self, p: &mut Protocol, pid: PoolId, intensity: (u64, u64), max_size: Amount) -> Result<(), ProtocolError> {
        let (num, den) = intensity;
        let extra = u64::from(self.rng.gen_range(0..den) < num % den);
        let count = num / den + extra;
        for _ in 0..count {
            let sell_wrapped = self.rng.gen::<bool>();
            let size = Amount(self.rng.gen_range(1..=max_size.0));
            let pool = p.amm().get(pid)?;
            if pool.is_empty() {
                continue;
            }
            let token_in = if sell_wrapped { pool.token_w } else { pool.token_o };
            let amount = size.min(bal(p, token_in, self.spec.account));
            if amount.is_zero() {
                continue;
            }
            p.swap_exact_in(pid, self.spec.account, token_in, amount, Amount::ZERO)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn provide(
        &mut self,
        p: &mut Protocol,
        pid: PoolId,
        now: Tick,
        enter_tick: Tick,
        exit_tick: Option<Tick>,
        amount_w: Amount,
        amount_o: Option<Amount>,
        claim_every: Option<u64>,
    ) -> Result<(), ProtocolError> {
        let acct = self.spec.account;
        if self.exited {
            return Ok(());
        }
        if let Some(entered) = self.entered_at {
            if exit_tick == Some(now) {
                let shares = p.amm().get(pid)?.shares_of(acct);
                if shares > 0 {
                    p.remove_liquidity(pid, acct, shares)?;
                }
                p.claim_lp(pid, acct)?;
                self.exited = true;
            } else if let Some(k) = claim_every {
                if now > entered && (now - entered).is_multiple_of(k) {
                    p.claim_lp(pid, acct)?;
                }
            }
            return Ok(());
        }
        if now < enter_tick || exit_tick.is_some_and(|x| now >= x) {
            return Ok(());
        }
        let pool = p.amm().get(pid)?;
        let (token_w, token_o) = (pool.token_w, pool.token_o);
        let bal_w = bal(p, token_w, acct);
        let bal_o = bal(p, token_o, acct);
        let entered = if pool.is_empty() {
            let w = amount_w.min(bal_w);
            let o = amount_o.unwrap_or_default().min(bal_o);
            if w.is_zero() || o.is_zero() {
                return Ok(());
            }
            match p.add_initial_liquidity(pid, acct, w, o) {
                Ok(_) => true,
                Err(ProtocolError::Amm(crate::amm::AmmError::ZeroShares)) => false,
                Err(e) => return Err(e),
            }
        } else {
            let (rw, ro) = pool.reserves();
            let affordable = bal_o.as_u128() * rw.as_u128() / ro.as_u128();
            let w = Amount(amount_w.min(bal_w).as_u128().min(affordable) as u64);
            if w.is_zero() {
                return Ok(());
            }
            match p.add_liquidity(pid, acct, w) {
                Ok(_) => true,
                Err(ProtocolError::Amm(crate::amm::AmmError::ZeroShares)) => false,
                Err(e) => return Err(e),
            }
        };
        if entered {
            self.entered_at = Some(now);
        }
        Ok(())
    }

    fn bridge_lock(&mut self, p: &mut Protocol, gid: GatewayId, amount: Amount, now: Tick) -> Result<(), ProtocolError> {
        let token_t = p.gateways().get(gid)?.token_t;
        if bal(p, token_t, self.spec.account) < amount {
            return Ok(());
        }
        p.lock(gid, self.spec.account, amount, now)
    }

    fn bridge_unwrap(&mut self, p: &mut Protocol, gid: GatewayId, amount: Amount, now: Tick) -> Result<(), ProtocolError> {
        let g = p.gateways().get(gid)?;
        let (token_wt, fee, issued) = (g.token_wt, g.unwrap_fee_flat_rgu, g.issued());
        if bal(p, token_wt, self.spec.account) < amount || issued < amount {
            return Ok(());
        }
        if !fee.is_zero() {
            let rgu = p.ledger().rgu().map(|r| bal(p, r, self.spec.account)).unwrap_or_default();
            if rgu < fee {
                return Ok(());
            }
        }
        p.unwrap(gid, self.spec.account, amount, now).map(|_| ())
    }
}
