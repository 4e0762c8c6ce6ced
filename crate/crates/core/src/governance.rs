//! Improvement-proposal lifecycle.
//!
//! Proposals cost an RGU deposit, which sits in a governance escrow account
//! while voting is open. Voting weight is the voter's spot RGU balance at
//! cast time, one immutable vote per account. After the window closes a
//! proposal passes iff turnout (against total RGU supply) meets the quorum
//! and the yes share meets the threshold. Passed deposits are refunded and
//! the payload is applied one tick later; failed deposits are burned.
//!
//! Moving balance between accounts to vote twice is possible and not
//! guarded against.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::amm::{PoolConfig, PoolId};
use crate::amount::{Amount, Tick, BPS};
use crate::gateway::{GatewayConfig, GatewayId};
use crate::ledger::{AccountId, ChainId, Ledger, LedgerError, TokenKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProposalId(pub u32);

impl fmt::Display for ProposalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GIP-{}", self.0)
    }
}

/// Whitelisted tunable parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKey {
    EmissionE0,
    EmissionDecayNum,
    EmissionDecayDen,
    EmissionPeriodTicks,
    LpFractionBps,
    PoolWeight(PoolId),
    PoolFeeBps(PoolId),
    GatewayUnwrapFee(GatewayId),
    DepositMin,
    VotingPeriod,
    QuorumBps,
    ThresholdBps,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    ParamChange { key: ParamKey, value: u64 },
    AddPool(PoolConfig),
    AddToken { chain: ChainId, symbol: String, kind: TokenKind },
    AddGateway(GatewayConfig),
    Text(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalStatus {
    Active,
    Passed,
    Failed,
    Applied,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub id: ProposalId,
    pub kind: ProposalKind,
    pub proposer: AccountId,
    pub deposit: Amount,
    pub start_tick: Tick,
    pub end_tick: Tick,
    pub yes: u128,
    pub no: u128,
    pub voters: BTreeSet<AccountId>,
    pub status: ProposalStatus,
    /// Tick whose governance phase applies a passed payload.
    pub apply_at: Option<Tick>,
    pub application_error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GovParams {
    pub deposit_min: Amount,
    pub voting_period: u64,
    pub quorum_bps: u32,
    pub threshold_bps: u32,
}

impl GovParams {
    pub fn validate(&self) -> Result<(), GovError> {
        if self.voting_period == 0 {
            return Err(GovError::InvalidParams("voting_period must be at least 1".into()));
        }
        if u64::from(self.quorum_bps) > BPS || u64::from(self.threshold_bps) > BPS {
            return Err(GovError::InvalidParams("quorum and threshold are at most 10000 bps".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GovError {
    #[error("deposit {deposit} below minimum {min}")]
    DepositTooSmall { deposit: Amount, min: Amount },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid governance parameters: {0}")]
    InvalidParams(String),
    #[error("{0} is not open for voting")]
    NotActive(ProposalId),
    #[error("{account} already voted on {proposal}")]
    AlreadyVoted { proposal: ProposalId, account: AccountId },
    #[error("{0} holds no RGU")]
    ZeroWeight(AccountId),
    #[error("{proposal} voting ends at tick {end}")]
    TooEarly { proposal: ProposalId, end: Tick },
    #[error("{0} already finalized")]
    AlreadyFinalized(ProposalId),
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("no RGU token registered")]
    NoRgu,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Governance {
    params: GovParams,
    proposals: Vec<Proposal>,
    escrow_account: AccountId,
    deposits_burned: Amount,
}

impl Governance {
    pub fn new(ledger: &mut Ledger, params: GovParams) -> Result<Self, GovError> {
        params.validate()?;
        Ok(Governance {
            params,
            proposals: Vec::new(),
            escrow_account: ledger.account("governance:escrow"),
            deposits_burned: Amount::ZERO,
        })
    }

    pub fn params(&self) -> GovParams {
        self.params
    }

    pub(crate) fn set_params(&mut self, params: GovParams) -> Result<(), GovError> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    pub fn escrow_account(&self) -> AccountId {
        self.escrow_account
    }

    pub fn deposits_burned(&self) -> Amount {
        self.deposits_burned
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    pub fn get(&self, id: ProposalId) -> Result<&Proposal, GovError> {
        self.proposals.get(id.0 as usize).ok_or(GovError::UnknownProposal(id))
    }

    fn get_mut(&mut self, id: ProposalId) -> Result<&mut Proposal, GovError> {
        self.proposals.get_mut(id.0 as usize).ok_or(GovError::UnknownProposal(id))
    }

    fn rgu(ledger: &Ledger) -> Result<(ChainId, crate::ledger::TokenId), GovError> {
        let rgu = ledger.rgu().ok_or(GovError::NoRgu)?;
        Ok((ledger.token(rgu)?.home_chain, rgu))
    }

    /// Escrow the deposit and open voting over `[now, now + voting_period)`.
    /// The payload must already have been validated against engine state.
    pub fn submit(
        &mut self,
        ledger: &mut Ledger,
        proposer: AccountId,
        kind: ProposalKind,
        deposit: Amount,
        now: Tick,
    ) -> Result<ProposalId, GovError> {
        if deposit < self.params.deposit_min {
            return Err(GovError::DepositTooSmall {
                deposit,
                min: self.params.deposit_min,
            });
        }
        let (chain, rgu) = Self::rgu(ledger)?;
        ledger.transfer(chain, rgu, proposer, self.escrow_account, deposit)?;
        let id = ProposalId(self.proposals.len() as u32);
        self.proposals.push(Proposal {
            id,
            kind,
            proposer,
            deposit,
            start_tick: now,
            end_tick: now + self.params.voting_period,
            yes: 0,
            no: 0,
            voters: BTreeSet::new(),
            status: ProposalStatus::Active,
            apply_at: None,
            application_error: None,
        });
        Ok(id)
    }

    pub fn vote(
        &mut self,
        ledger: &Ledger,
        id: ProposalId,
        account: AccountId,
        support: bool,
        now: Tick,
    ) -> Result<(), GovError> {
        let (_, rgu) = Self::rgu(ledger)?;
        ledger.account_label(account)?;
        let p = self.get(id)?;
        if p.status != ProposalStatus::Active || now >= p.end_tick || now < p.start_tick {
            return Err(GovError::NotActive(id));
        }
        if p.voters.contains(&account) {
            return Err(GovError::AlreadyVoted { proposal: id, account });
        }
        let weight = ledger.balance(rgu, account);
        if weight.is_zero() {
            return Err(GovError::ZeroWeight(account));
        }
        let p = self.get_mut(id)?;
        if support {
            p.yes += weight.as_u128();
        } else {
            p.no += weight.as_u128();
        }
        p.voters.insert(account);
        Ok(())
    }

    /// Close voting. Passed proposals get their deposit back and are queued
    /// for the next tick; failed ones have their deposit burned.
    pub fn finalize(&mut self, ledger: &mut Ledger, id: ProposalId, now: Tick) -> Result<ProposalStatus, GovError> {
        let p = self.get(id)?;
        if p.status != ProposalStatus::Active {
            return Err(GovError::AlreadyFinalized(id));
        }
        if now < p.end_tick {
            return Err(GovError::TooEarly { proposal: id, end: p.end_tick });
        }
        let (chain, rgu) = Self::rgu(ledger)?;
        let supply = ledger.supply_of(rgu).as_u128();
        let passed = tally_passes(p.yes, p.no, supply, self.params.quorum_bps, self.params.threshold_bps);
        let (proposer, deposit) = (p.proposer, p.deposit);
        if passed {
            ledger.transfer(chain, rgu, self.escrow_account, proposer, deposit)?;
        } else {
            let burned = self.deposits_burned.checked_add(deposit).ok_or(LedgerError::Overflow)?;
            ledger.burn(chain, rgu, self.escrow_account, deposit)?;
            self.deposits_burned = burned;
        }
        let p = self.get_mut(id)?;
        if passed {
            p.status = ProposalStatus::Passed;
            p.apply_at = Some(now + 1);
        } else {
            p.status = ProposalStatus::Failed;
        }
        Ok(p.status)
    }

    /// Active proposals whose window has closed by `now`, in id order.
    pub fn due_for_finalization(&self, now: Tick) -> Vec<ProposalId> {
        self.proposals
            .iter()
            .filter(|p| p.status == ProposalStatus::Active && p.end_tick <= now)
            .map(|p| p.id)
            .collect()
    }

    /// Passed proposals awaiting application at or before `now`, in id order.
    pub fn due_for_application(&self, now: Tick) -> Vec<ProposalId> {
        self.proposals
            .iter()
            .filter(|p| {
                p.status == ProposalStatus::Passed
                    && p.application_error.is_none()
                    && p.apply_at.is_some_and(|t| t <= now)
            })
            .map(|p| p.id)
            .collect()
    }

    pub(crate) fn mark_applied(&mut self, id: ProposalId) -> Result<(), GovError> {
        let p = self.get_mut(id)?;
        if p.status != ProposalStatus::Passed {
            return Err(GovError::NotActive(id));
        }
        p.status = ProposalStatus::Applied;
        Ok(())
    }

    pub(crate) fn mark_application_failed(&mut self, id: ProposalId, reason: String) -> Result<(), GovError> {
        let p = self.get_mut(id)?;
        p.application_error = Some(reason);
        Ok(())
    }

    /// RGU in the escrow account equals the deposits of active proposals.
    pub fn audit(&self, ledger: &Ledger) -> Result<(), String> {
        let active: u128 = self
            .proposals
            .iter()
            .filter(|p| p.status == ProposalStatus::Active)
            .map(|p| p.deposit.as_u128())
            .sum();
        let held = match ledger.rgu() {
            Some(rgu) => ledger.balance(rgu, self.escrow_account).as_u128(),
            None => 0,
        };
        if held != active {
            return Err(format!(
                "governance escrow holds {held} RGU but active deposits total {active}"
            ));
        }
        Ok(())
    }
}

/// `(yes + no) / supply >= quorum` and `yes / (yes + no) >= threshold`,
/// compared exactly by cross-multiplication. An empty vote never passes.
pub fn tally_passes(yes: u128, no: u128, supply: u128, quorum_bps: u32, threshold_bps: u32) -> bool {
    let turnout = yes + no;
    if turnout == 0 {
        return false;
    }
    let bps = u128::from(BPS);
    turnout * bps >= u128::from(quorum_bps) * supply && yes * bps >= u128::from(threshold_bps) * turnout
}
