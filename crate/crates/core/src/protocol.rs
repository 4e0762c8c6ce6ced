//! The composed protocol state: ledger, gateways, pools, rewards, and
//! governance, plus the cross-module invariant audit.
//!
//! All supply changes are routed through here. Share-changing pool
//! operations call the reward hook so accrued rewards are settled before the
//! share count moves.

use thiserror::Error;

use crate::amm::{Amm, AmmError, PoolConfig, PoolId, MAX_FEE_BPS};
use crate::amount::{Amount, Tick, BPS};
use crate::gateway::{GatewayConfig, GatewayError, GatewayId, Gateways};
use crate::governance::{GovError, GovParams, Governance, ParamKey, ProposalId, ProposalKind, ProposalStatus};
use crate::ledger::{AccountId, ChainId, Ledger, LedgerError, TokenId, TokenKind};
use crate::rewards::{EmissionSchedule, RewardConfig, RewardError, Rewards};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Governance(#[from] GovError),
    #[error("account {0:?} is owned by a protocol module")]
    ModuleAccount(String),
    #[error("genesis allocation of wrapped tokens must go through a gateway")]
    WrappedGenesis,
}

/// A named invariant that failed during an audit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invariant {name} violated: {detail}")]
pub struct InvariantViolation {
    pub name: &'static str,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub multi_gateway: bool,
    pub emission: EmissionSchedule,
    pub rewards: RewardConfig,
    pub governance: GovParams,
}

/// Outcome of one governance phase item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GovEvent {
    Applied(ProposalId),
    ApplicationFailed(ProposalId, String),
    Finalized(ProposalId, ProposalStatus),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Protocol {
    ledger: Ledger,
    gateways: Gateways,
    amm: Amm,
    rewards: Rewards,
    governance: Governance,
    rgu_genesis: u128,
}

fn is_module_label(label: &str) -> bool {
    label.contains(':')
}

impl Protocol {
    pub fn new(config: ProtocolConfig) -> Result<Self, ProtocolError> {
        let mut ledger = Ledger::new();
        let governance = Governance::new(&mut ledger, config.governance)?;
        Ok(Protocol {
            ledger,
            gateways: Gateways::new(config.multi_gateway),
            amm: Amm::new(),
            rewards: Rewards::new(config.emission, config.rewards)?,
            governance,
            rgu_genesis: 0,
        })
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn gateways(&self) -> &Gateways {
        &self.gateways
    }

    pub fn amm(&self) -> &Amm {
        &self.amm
    }

    pub fn rewards(&self) -> &Rewards {
        &self.rewards
    }

    pub fn governance(&self) -> &Governance {
        &self.governance
    }

    /// RGU minted at genesis, before any rewards.
    pub fn rgu_genesis(&self) -> u128 {
        self.rgu_genesis
    }

    pub fn rgu_supply(&self) -> Amount {
        self.ledger.rgu().map(|t| self.ledger.supply_of(t)).unwrap_or_default()
    }

    /// Fee burns plus burned governance deposits.
    pub fn rgu_burned(&self) -> u128 {
        self.gateways.fees_burned().as_u128() + self.governance.deposits_burned().as_u128()
    }

    // ---- registration -------------------------------------------------

    pub fn register_chain(&mut self, name: &str) -> Result<ChainId, ProtocolError> {
        Ok(self.ledger.register_chain(name)?)
    }

    pub fn register_token(&mut self, chain: ChainId, symbol: &str, kind: TokenKind) -> Result<TokenId, ProtocolError> {
        Ok(self.ledger.register_token(chain, symbol, kind)?)
    }

    pub fn account(&mut self, label: &str) -> AccountId {
        self.ledger.account(label)
    }

    pub fn register_gateway(&mut self, cfg: GatewayConfig) -> Result<GatewayId, ProtocolError> {
        let id = self.gateways.register(&mut self.ledger, cfg)?;
        self.rewards.sync_gateways(self.gateways.len());
        Ok(id)
    }

    pub fn create_pool(&mut self, cfg: PoolConfig) -> Result<PoolId, ProtocolError> {
        let id = self.amm.create_pool(&mut self.ledger, cfg)?;
        self.rewards.sync_pools(self.amm.len());
        Ok(id)
    }

    /// Initial balance of an origin or RGU token.
    pub fn genesis_allocate(&mut self, token: TokenId, account: AccountId, amount: Amount) -> Result<(), ProtocolError> {
        let info = self.ledger.token(token)?.clone();
        if matches!(info.kind, TokenKind::Wrapped { .. }) {
            return Err(ProtocolError::WrappedGenesis);
        }
        self.ledger.mint(info.home_chain, token, account, amount)?;
        if info.kind == TokenKind::Rgu {
            self.rgu_genesis += amount.as_u128();
        }
        Ok(())
    }

    /// Initial wrapped balance, fully backed by escrow at the given gateway.
    pub fn genesis_bridge(&mut self, gateway: GatewayId, account: AccountId, amount: Amount) -> Result<(), ProtocolError> {
        Ok(self.gateways.genesis_issue(&mut self.ledger, gateway, account, amount)?)
    }

    /// Plain transfer between user accounts.
    pub fn transfer(
        &mut self,
        chain: ChainId,
        token: TokenId,
        from: AccountId,
        to: AccountId,
        amount: Amount,
    ) -> Result<(), ProtocolError> {
        for a in [from, to] {
            let label = self.ledger.account_label(a)?;
            if is_module_label(label) {
                return Err(ProtocolError::ModuleAccount(label.to_string()));
            }
        }
        Ok(self.ledger.transfer(chain, token, from, to, amount)?)
    }

    // ---- gateways -----------------------------------------------------

    pub fn lock(&mut self, gateway: GatewayId, user: AccountId, amount: Amount, now: Tick) -> Result<(), ProtocolError> {
        Ok(self.gateways.lock(&mut self.ledger, gateway, user, amount, now)?)
    }

    pub fn unwrap(&mut self, gateway: GatewayId, user: AccountId, amount: Amount, now: Tick) -> Result<Amount, ProtocolError> {
        Ok(self.gateways.unwrap(&mut self.ledger, gateway, user, amount, now)?)
    }

    pub fn process_pending(&mut self, gateway: GatewayId, now: Tick) -> Result<usize, ProtocolError> {
        Ok(self.gateways.process_pending(&mut self.ledger, gateway, now)?)
    }

    /// Process every gateway in id order.
    pub fn process_all_pending(&mut self, now: Tick) -> Result<usize, ProtocolError> {
        let mut total = 0;
        for i in 0..self.gateways.len() {
            total += self.process_pending(GatewayId(i as u32), now)?;
        }
        Ok(total)
    }

    // ---- pools --------------------------------------------------------

    fn shares_hook(&mut self, pool: PoolId, account: AccountId, old: u64) -> Result<(), ProtocolError> {
        let new = self.amm.get(pool)?.shares_of(account);
        self.rewards.on_shares_changed(pool, account, old, new)?;
        Ok(())
    }

    pub fn add_initial_liquidity(
        &mut self,
        pool: PoolId,
        account: AccountId,
        amount_w: Amount,
        amount_o: Amount,
    ) -> Result<u64, ProtocolError> {
        let old = self.amm.get(pool)?.shares_of(account);
        let shares = self
            .amm
            .add_initial_liquidity(&mut self.ledger, pool, account, amount_w, amount_o)?;
        self.shares_hook(pool, account, old)?;
        Ok(shares)
    }

    pub fn add_liquidity(&mut self, pool: PoolId, account: AccountId, amount_w: Amount) -> Result<(u64, Amount), ProtocolError> {
        let old = self.amm.get(pool)?.shares_of(account);
        let out = self.amm.add_liquidity(&mut self.ledger, pool, account, amount_w)?;
        self.shares_hook(pool, account, old)?;
        Ok(out)
    }

    pub fn remove_liquidity(&mut self, pool: PoolId, account: AccountId, shares: u64) -> Result<(Amount, Amount), ProtocolError> {
        let old = self.amm.get(pool)?.shares_of(account);
        let out = self.amm.remove_liquidity(&mut self.ledger, pool, account, shares)?;
        self.shares_hook(pool, account, old)?;
        Ok(out)
    }

    pub fn swap_exact_in(
        &mut self,
        pool: PoolId,
        account: AccountId,
        token_in: TokenId,
        amount_in: Amount,
        min_out: Amount,
    ) -> Result<Amount, ProtocolError> {
        Ok(self
            .amm
            .swap_exact_in(&mut self.ledger, pool, account, token_in, amount_in, min_out)?)
    }

    // ---- rewards ------------------------------------------------------

    pub fn accrue(&mut self, now: Tick) -> Result<(), ProtocolError> {
        Ok(self.rewards.accrue(now, &self.ledger, &self.amm, &self.gateways)?)
    }

    pub fn pending_lp(&self, pool: PoolId, account: AccountId) -> Result<Amount, ProtocolError> {
        Ok(self.rewards.pending_lp(&self.amm, pool, account)?)
    }

    pub fn claim_lp(&mut self, pool: PoolId, account: AccountId) -> Result<Amount, ProtocolError> {
        Ok(self.rewards.claim_lp(&mut self.ledger, &self.amm, pool, account)?)
    }

    pub fn pending_gateway(&self, gateway: GatewayId) -> Result<Amount, ProtocolError> {
        self.gateways.get(gateway)?;
        Ok(self.rewards.pending_gateway(gateway))
    }

    pub fn claim_gateway(&mut self, gateway: GatewayId) -> Result<Amount, ProtocolError> {
        Ok(self.rewards.claim_gateway(&mut self.ledger, &self.gateways, gateway)?)
    }

    // ---- governance ---------------------------------------------------

    /// Check a payload against current engine state: known key with an
    /// in-range value, or a well-formed registration.
    pub fn validate_payload(&self, kind: &ProposalKind) -> Result<(), String> {
        match kind {
            ProposalKind::ParamChange { key, value } => self.check_param(*key, *value),
            ProposalKind::AddPool(cfg) => self.amm.check_config(&self.ledger, cfg).map_err(|e| e.to_string()),
            ProposalKind::AddToken { chain, symbol, kind } => {
                self.ledger.check_token(*chain, symbol, *kind).map_err(|e| e.to_string())
            }
            ProposalKind::AddGateway(cfg) => {
                self.ledger.account_label(cfg.provider).map_err(|e| e.to_string())?;
                self.gateways.check_config(&self.ledger, cfg).map_err(|e| e.to_string())
            }
            ProposalKind::Text(_) => Ok(()),
        }
    }

    fn check_param(&self, key: ParamKey, value: u64) -> Result<(), String> {
        let schedule = self.rewards.schedule();
        let as_bps = |v: u64, cap: u64| -> Result<u32, String> {
            if v > cap {
                Err(format!("{key:?} = {v} exceeds {cap}"))
            } else {
                Ok(v as u32)
            }
        };
        match key {
            ParamKey::EmissionE0 => {
                if value > 0 && self.amm.iter().all(|(_, p)| p.weight == 0) {
                    return Err("positive emission needs a pool with positive weight".into());
                }
                Ok(())
            }
            ParamKey::EmissionDecayNum => EmissionSchedule { decay_num: value, ..schedule }
                .validate()
                .map_err(|e| e.to_string()),
            ParamKey::EmissionDecayDen => EmissionSchedule { decay_den: value, ..schedule }
                .validate()
                .map_err(|e| e.to_string()),
            ParamKey::EmissionPeriodTicks => EmissionSchedule { period_ticks: value, ..schedule }
                .validate()
                .map_err(|e| e.to_string()),
            ParamKey::LpFractionBps => as_bps(value, BPS).map(|_| ()),
            ParamKey::PoolWeight(pool) => {
                self.amm.get(pool).map_err(|e| e.to_string())?;
                let others: u128 = self
                    .amm
                    .iter()
                    .filter(|(id, _)| *id != pool)
                    .map(|(_, p)| u128::from(p.weight))
                    .sum();
                if others + u128::from(value) == 0 && !schedule.e0.is_zero() {
                    return Err("all pool weights would be zero while emission is positive".into());
                }
                Ok(())
            }
            ParamKey::PoolFeeBps(pool) => {
                self.amm.get(pool).map_err(|e| e.to_string())?;
                as_bps(value, u64::from(MAX_FEE_BPS)).map(|_| ())
            }
            ParamKey::GatewayUnwrapFee(gateway) => self.gateways.get(gateway).map(|_| ()).map_err(|e| e.to_string()),
            ParamKey::DepositMin => Ok(()),
            ParamKey::VotingPeriod => {
                if value == 0 {
                    Err("voting_period must be at least 1".into())
                } else {
                    Ok(())
                }
            }
            ParamKey::QuorumBps | ParamKey::ThresholdBps => as_bps(value, BPS).map(|_| ()),
        }
    }

    pub fn submit(
        &mut self,
        proposer: AccountId,
        kind: ProposalKind,
        deposit: Amount,
        now: Tick,
    ) -> Result<ProposalId, ProtocolError> {
        self.validate_payload(&kind).map_err(GovError::InvalidPayload)?;
        Ok(self.governance.submit(&mut self.ledger, proposer, kind, deposit, now)?)
    }

    pub fn vote(&mut self, proposal: ProposalId, account: AccountId, support: bool, now: Tick) -> Result<(), ProtocolError> {
        Ok(self.governance.vote(&self.ledger, proposal, account, support, now)?)
    }

    pub fn finalize(&mut self, proposal: ProposalId, now: Tick) -> Result<ProposalStatus, ProtocolError> {
        Ok(self.governance.finalize(&mut self.ledger, proposal, now)?)
    }

    fn apply_param(&mut self, key: ParamKey, value: u64) -> Result<(), ProtocolError> {
        let schedule = self.rewards.schedule();
        let gov = self.governance.params();
        match key {
            ParamKey::EmissionE0 => self.rewards.set_schedule(EmissionSchedule { e0: Amount(value), ..schedule })?,
            ParamKey::EmissionDecayNum => self.rewards.set_schedule(EmissionSchedule { decay_num: value, ..schedule })?,
            ParamKey::EmissionDecayDen => self.rewards.set_schedule(EmissionSchedule { decay_den: value, ..schedule })?,
            ParamKey::EmissionPeriodTicks => {
                self.rewards.set_schedule(EmissionSchedule { period_ticks: value, ..schedule })?
            }
            ParamKey::LpFractionBps => self.rewards.set_lp_fraction(value as u32)?,
            ParamKey::PoolWeight(pool) => self.amm.set_weight(pool, value)?,
            ParamKey::PoolFeeBps(pool) => self.amm.set_fee(pool, value as u32)?,
            ParamKey::GatewayUnwrapFee(gateway) => self.gateways.set_unwrap_fee(gateway, Amount(value))?,
            ParamKey::DepositMin => self.governance.set_params(GovParams { deposit_min: Amount(value), ..gov })?,
            ParamKey::VotingPeriod => self.governance.set_params(GovParams { voting_period: value, ..gov })?,
            ParamKey::QuorumBps => self.governance.set_params(GovParams { quorum_bps: value as u32, ..gov })?,
            ParamKey::ThresholdBps => self.governance.set_params(GovParams { threshold_bps: value as u32, ..gov })?,
        }
        Ok(())
    }

    fn apply_payload(&mut self, kind: &ProposalKind) -> Result<(), ProtocolError> {
        match kind {
            ProposalKind::ParamChange { key, value } => self.apply_param(*key, *value),
            ProposalKind::AddPool(cfg) => self.create_pool(cfg.clone()).map(|_| ()),
            ProposalKind::AddToken { chain, symbol, kind } => self.register_token(*chain, symbol, *kind).map(|_| ()),
            ProposalKind::AddGateway(cfg) => self.register_gateway(cfg.clone()).map(|_| ()),
            ProposalKind::Text(_) => Ok(()),
        }
    }

    /// Apply a passed proposal. A payload that no longer validates leaves
    /// the engine untouched, keeps the proposal `Passed`, and records the
    /// reason.
    pub fn apply(&mut self, proposal: ProposalId) -> Result<GovEvent, ProtocolError> {
        let p = self.governance.get(proposal)?;
        if p.status != ProposalStatus::Passed {
            return Err(GovError::NotActive(proposal).into());
        }
        let kind = p.kind.clone();
        if let Err(reason) = self.validate_payload(&kind) {
            self.governance.mark_application_failed(proposal, reason.clone())?;
            return Ok(GovEvent::ApplicationFailed(proposal, reason));
        }
        if let Err(e) = self.apply_payload(&kind) {
            let reason = e.to_string();
            self.governance.mark_application_failed(proposal, reason.clone())?;
            return Ok(GovEvent::ApplicationFailed(proposal, reason));
        }
        self.governance.mark_applied(proposal)?;
        Ok(GovEvent::Applied(proposal))
    }

    /// Apply every proposal due by `now`, then finalize every proposal whose
    /// voting window has closed, each in id order.
    pub fn governance_phase(&mut self, now: Tick) -> Result<Vec<GovEvent>, ProtocolError> {
        let mut events = Vec::new();
        for id in self.governance.due_for_application(now) {
            events.push(self.apply(id)?);
        }
        for id in self.governance.due_for_finalization(now) {
            let status = self.finalize(id, now)?;
            events.push(GovEvent::Finalized(id, status));
        }
        Ok(events)
    }

    // ---- audit --------------------------------------------------------

    /// Sweep every cross-module invariant.
    pub fn audit(&self) -> Result<(), InvariantViolation> {
        let fail = |name: &'static str| move |detail: String| InvariantViolation { name, detail };
        self.ledger.check_supply_sums().map_err(fail("ledger_supply_sums"))?;
        self.gateways.audit(&self.ledger).map_err(fail("gateway_escrow"))?;
        self.amm.audit(&self.ledger).map_err(fail("pool_consistency"))?;
        self.rewards
            .conservation(&self.amm)
            .map_err(|e| e.to_string())
            .and_then(|c| c.check())
            .map_err(fail("reward_conservation"))?;
        self.governance.audit(&self.ledger).map_err(fail("governance_escrow"))?;
        self.check_rgu_supply().map_err(fail("rgu_supply_identity"))?;
        Ok(())
    }

    fn check_rgu_supply(&self) -> Result<(), String> {
        let supply = self.rgu_supply().as_u128();
        let expected = (self.rgu_genesis + self.rewards.claimed()).checked_sub(self.rgu_burned());
        if expected != Some(supply) {
            return Err(format!(
                "supply {supply} != genesis {} + claimed {} - burned {}",
                self.rgu_genesis,
                self.rewards.claimed(),
                self.rgu_burned()
            ));
        }
        Ok(())
    }
}
