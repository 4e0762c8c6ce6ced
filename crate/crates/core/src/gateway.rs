//! Cross-chain gateways: LU-Port escrow on the origin chain and IB-Port
//! issue/burn on the destination chain.
//!
//! Transfers are not instantaneous. A lock escrows `T` immediately and queues
//! a mint of `wT` that matures `latency_ticks` later; an unwrap burns `wT`
//! (plus the flat RGU fee) immediately and queues the release of `T`.
//!
//! Per gateway the escrow identity
//! `escrow == issued + pending mints + pending unlocks`
//! holds at every phase boundary, where `issued` is the `wT` this gateway has
//! put into circulation and not yet taken back.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::amount::{Amount, Tick};
use crate::ledger::{AccountId, ChainId, Ledger, LedgerError, TokenId, TokenKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GatewayId(pub u32);

impl fmt::Display for GatewayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gateway#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferKind {
    Mint,
    Unlock,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingTransfer {
    pub kind: TransferKind,
    pub beneficiary: AccountId,
    pub amount: Amount,
    pub mature_at: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GatewayConfig {
    pub label: String,
    pub origin_chain: ChainId,
    pub dest_chain: ChainId,
    pub token_t: TokenId,
    pub token_wt: TokenId,
    pub provider: AccountId,
    pub latency_ticks: u64,
    pub unwrap_fee_flat_rgu: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gateway {
    pub label: String,
    pub origin_chain: ChainId,
    pub dest_chain: ChainId,
    pub token_t: TokenId,
    pub token_wt: TokenId,
    pub provider: AccountId,
    pub latency_ticks: u64,
    pub unwrap_fee_flat_rgu: Amount,
    /// Ledger account holding the escrowed `T`.
    pub escrow_account: AccountId,
    escrow: Amount,
    issued: Amount,
    pending: VecDeque<PendingTransfer>,
}

impl Gateway {
    pub fn escrow(&self) -> Amount {
        self.escrow
    }

    /// `wT` issued through this gateway and still in circulation.
    pub fn issued(&self) -> Amount {
        self.issued
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingTransfer> {
        self.pending.iter()
    }

    fn pending_sum(&self, kind: TransferKind) -> Amount {
        Amount(
            self.pending
                .iter()
                .filter(|p| p.kind == kind)
                .map(|p| p.amount.0)
                .sum(),
        )
    }

    pub fn pending_mints(&self) -> Amount {
        self.pending_sum(TransferKind::Mint)
    }

    pub fn pending_unlocks(&self) -> Amount {
        self.pending_sum(TransferKind::Unlock)
    }

    /// Escrow net of queued releases: the `T` backing `wT` that is in
    /// circulation or about to be minted. This is the weight used to split
    /// gateway rewards between gateways of the same wrapped token.
    pub fn outstanding(&self) -> Amount {
        Amount(self.escrow.0 - self.pending_unlocks().0)
    }

    fn enqueue(&mut self, transfer: PendingTransfer) {
        let at = self.pending.partition_point(|p| p.mature_at <= transfer.mature_at);
        self.pending.insert(at, transfer);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("inconsistent token pair: {0}")]
    InconsistentTokenPair(String),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("a gateway for {0} already exists and multiple gateways are disabled")]
    DuplicateGateway(TokenId),
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("insufficient RGU for unwrap fee: holds {available}, fee {fee}")]
    InsufficientRguForFee { available: Amount, fee: Amount },
    #[error("unwrap of {requested} exceeds the {issued} issued through {gateway}")]
    ExceedsIssued {
        gateway: GatewayId,
        issued: Amount,
        requested: Amount,
    },
    #[error("transfer amount overflows the escrow")]
    Overflow,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Gateways {
    list: Vec<Gateway>,
    allow_multiple: bool,
    fees_burned: Amount,
}

impl Gateways {
    pub fn new(allow_multiple: bool) -> Self {
        Gateways {
            allow_multiple,
            ..Default::default()
        }
    }

    pub fn allow_multiple(&self) -> bool {
        self.allow_multiple
    }

    pub fn get(&self, id: GatewayId) -> Result<&Gateway, GatewayError> {
        self.list
            .get(id.0 as usize)
            .ok_or_else(|| GatewayError::UnknownEntity(id.to_string()))
    }

    fn get_mut(&mut self, id: GatewayId) -> Result<&mut Gateway, GatewayError> {
        self.list
            .get_mut(id.0 as usize)
            .ok_or_else(|| GatewayError::UnknownEntity(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (GatewayId, &Gateway)> {
        self.list.iter().enumerate().map(|(i, g)| (GatewayId(i as u32), g))
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn find(&self, label: &str) -> Option<GatewayId> {
        self.list
            .iter()
            .position(|g| g.label == label)
            .map(|i| GatewayId(i as u32))
    }

    /// Gateways serving the given wrapped token, in id order.
    pub fn for_wrapped(&self, token_wt: TokenId) -> impl Iterator<Item = (GatewayId, &Gateway)> {
        self.iter().filter(move |(_, g)| g.token_wt == token_wt)
    }

    /// Total RGU burned as unwrap fees.
    pub fn fees_burned(&self) -> Amount {
        self.fees_burned
    }

    pub(crate) fn set_unwrap_fee(&mut self, id: GatewayId, fee: Amount) -> Result<(), GatewayError> {
        self.get_mut(id)?.unwrap_fee_flat_rgu = fee;
        Ok(())
    }

    /// Validate a prospective registration without mutating anything.
    pub fn check_config(&self, ledger: &Ledger, cfg: &GatewayConfig) -> Result<(), GatewayError> {
        let unknown = |e: LedgerError| GatewayError::UnknownEntity(e.to_string());
        ledger.chain_name(cfg.origin_chain).map_err(unknown)?;
        ledger.chain_name(cfg.dest_chain).map_err(unknown)?;
        ledger.account_label(cfg.provider).map_err(unknown)?;
        let t = ledger.token(cfg.token_t).map_err(unknown)?;
        let wt = ledger.token(cfg.token_wt).map_err(unknown)?;
        if t.kind != TokenKind::Origin || t.home_chain != cfg.origin_chain {
            return Err(GatewayError::InconsistentTokenPair(format!(
                "{} is not an origin token on {}",
                t.symbol, cfg.origin_chain
            )));
        }
        match wt.kind {
            TokenKind::Wrapped {
                underlying,
                origin_chain,
            } if underlying == cfg.token_t
                && origin_chain == cfg.origin_chain
                && wt.home_chain == cfg.dest_chain => {}
            _ => {
                return Err(GatewayError::InconsistentTokenPair(format!(
                    "{} on {} does not wrap {}",
                    wt.symbol, cfg.dest_chain, t.symbol
                )))
            }
        }
        if !cfg.unwrap_fee_flat_rgu.is_zero() && ledger.rgu().is_none() {
            return Err(GatewayError::UnknownEntity(
                "unwrap fee configured but no RGU token is registered".into(),
            ));
        }
        if !self.allow_multiple && self.for_wrapped(cfg.token_wt).next().is_some() {
            return Err(GatewayError::DuplicateGateway(cfg.token_wt));
        }
        if self.find(&cfg.label).is_some() {
            return Err(GatewayError::UnknownEntity(format!(
                "gateway label {:?} already used",
                cfg.label
            )));
        }
        Ok(())
    }

    pub fn register(&mut self, ledger: &mut Ledger, cfg: GatewayConfig) -> Result<GatewayId, GatewayError> {
        self.check_config(ledger, &cfg)?;
        let id = GatewayId(self.list.len() as u32);
        let escrow_account = ledger.account(&format!("gateway:{}", cfg.label));
        self.list.push(Gateway {
            label: cfg.label,
            origin_chain: cfg.origin_chain,
            dest_chain: cfg.dest_chain,
            token_t: cfg.token_t,
            token_wt: cfg.token_wt,
            provider: cfg.provider,
            latency_ticks: cfg.latency_ticks,
            unwrap_fee_flat_rgu: cfg.unwrap_fee_flat_rgu,
            escrow_account,
            escrow: Amount::ZERO,
            issued: Amount::ZERO,
            pending: VecDeque::new(),
        });
        Ok(id)
    }

    /// Initial allocation of `wT` backed by freshly minted escrowed `T`, used
    /// to set up scenario balances without a confirmation delay.
    pub(crate) fn genesis_issue(
        &mut self,
        ledger: &mut Ledger,
        id: GatewayId,
        account: AccountId,
        amount: Amount,
    ) -> Result<(), GatewayError> {
        let gw = self.get(id)?;
        let (origin, dest, t, wt, escrow_account) =
            (gw.origin_chain, gw.dest_chain, gw.token_t, gw.token_wt, gw.escrow_account);
        let escrow = gw.escrow.checked_add(amount).ok_or(GatewayError::Overflow)?;
        let issued = gw.issued.checked_add(amount).ok_or(GatewayError::Overflow)?;
        ledger.account_label(account)?;
        if ledger.supply_of(t).checked_add(amount).is_none() || ledger.supply_of(wt).checked_add(amount).is_none() {
            return Err(LedgerError::Overflow.into());
        }
        ledger.mint(origin, t, escrow_account, amount)?;
        ledger.mint(dest, wt, account, amount)?;
        let gw = self.get_mut(id)?;
        gw.escrow = escrow;
        gw.issued = issued;
        Ok(())
    }

    /// Lock `T` at the LU-Port; the matching `wT` mint matures at
    /// `now + latency_ticks`.
    pub fn lock(
        &mut self,
        ledger: &mut Ledger,
        id: GatewayId,
        user: AccountId,
        amount: Amount,
        now: Tick,
    ) -> Result<(), GatewayError> {
        if amount.is_zero() {
            return Err(GatewayError::ZeroAmount);
        }
        let gw = self.get(id)?;
        let escrow = gw.escrow.checked_add(amount).ok_or(GatewayError::Overflow)?;
        ledger.transfer(gw.origin_chain, gw.token_t, user, gw.escrow_account, amount)?;
        let gw = self.get_mut(id)?;
        gw.escrow = escrow;
        let mature_at = now.saturating_add(gw.latency_ticks);
        gw.enqueue(PendingTransfer {
            kind: TransferKind::Mint,
            beneficiary: user,
            amount,
            mature_at,
        });
        Ok(())
    }

    /// Burn `wT` at the IB-Port, burn the flat RGU fee, and queue the
    /// release of `T`. Returns the fee burned.
    pub fn unwrap(
        &mut self,
        ledger: &mut Ledger,
        id: GatewayId,
        user: AccountId,
        amount: Amount,
        now: Tick,
    ) -> Result<Amount, GatewayError> {
        if amount.is_zero() {
            return Err(GatewayError::ZeroAmount);
        }
        let gw = self.get(id)?;
        ledger.account_label(user)?;
        let held = ledger.balance(gw.token_wt, user);
        if held < amount {
            return Err(LedgerError::InsufficientBalance {
                token: gw.token_wt,
                account: user,
                available: held,
                required: amount,
            }
            .into());
        }
        if gw.issued < amount {
            return Err(GatewayError::ExceedsIssued {
                gateway: id,
                issued: gw.issued,
                requested: amount,
            });
        }
        let fee = gw.unwrap_fee_flat_rgu;
        let rgu = if fee.is_zero() {
            None
        } else {
            let rgu = ledger.rgu().ok_or_else(|| GatewayError::UnknownEntity("RGU token".into()))?;
            let available = ledger.balance(rgu, user);
            if available < fee {
                return Err(GatewayError::InsufficientRguForFee { available, fee });
            }
            Some((ledger.token(rgu)?.home_chain, rgu))
        };
        let fees_burned = self.fees_burned.checked_add(fee).ok_or(GatewayError::Overflow)?;

        // all preconditions checked; the ledger calls below cannot fail
        ledger.burn(gw.dest_chain, gw.token_wt, user, amount)?;
        if let Some((chain, rgu)) = rgu {
            ledger.burn(chain, rgu, user, fee)?;
        }
        self.fees_burned = fees_burned;
        let gw = self.get_mut(id)?;
        gw.issued = Amount(gw.issued.0 - amount.0);
        let mature_at = now.saturating_add(gw.latency_ticks);
        gw.enqueue(PendingTransfer {
            kind: TransferKind::Unlock,
            beneficiary: user,
            amount,
            mature_at,
        });
        Ok(fee)
    }

    /// Execute every queued transfer with `mature_at <= now`, in queue order.
    ///
    /// Cannot fail while the escrow identity holds; an error here means the
    /// state was already corrupt.
    pub fn process_pending(&mut self, ledger: &mut Ledger, id: GatewayId, now: Tick) -> Result<usize, GatewayError> {
        let gw = self.get_mut(id)?;
        let mut count = 0;
        while gw.pending.front().is_some_and(|p| p.mature_at <= now) {
            let p = gw.pending.pop_front().expect("front checked");
            match p.kind {
                TransferKind::Mint => {
                    ledger.mint(gw.dest_chain, gw.token_wt, p.beneficiary, p.amount)?;
                    gw.issued = gw.issued.checked_add(p.amount).ok_or(GatewayError::Overflow)?;
                }
                TransferKind::Unlock => {
                    ledger.transfer(gw.origin_chain, gw.token_t, gw.escrow_account, p.beneficiary, p.amount)?;
                    gw.escrow = Amount(gw.escrow.0 - p.amount.0);
                }
            }
            count += 1;
        }
        Ok(count)
    }

    /// Escrow identity per gateway, escrow account balances, and the
    /// per-token sum of issued amounts against the ledger supply of `wT`.
    pub fn audit(&self, ledger: &Ledger) -> Result<(), String> {
        for (id, gw) in self.iter() {
            let rhs = gw.issued.0 as u128 + gw.pending_mints().0 as u128 + gw.pending_unlocks().0 as u128;
            if gw.escrow.as_u128() != rhs {
                return Err(format!(
                    "{id} ({}): escrow {} != issued {} + pending mints {} + pending unlocks {}",
                    gw.label,
                    gw.escrow,
                    gw.issued,
                    gw.pending_mints(),
                    gw.pending_unlocks()
                ));
            }
            let held = ledger.balance(gw.token_t, gw.escrow_account);
            if held != gw.escrow {
                return Err(format!(
                    "{id} ({}): escrow account holds {held} but escrow is {}",
                    gw.label, gw.escrow
                ));
            }
            if gw.pending.iter().any(|p| p.amount.is_zero())
                || gw.pending.iter().zip(gw.pending.iter().skip(1)).any(|(a, b)| a.mature_at > b.mature_at)
            {
                return Err(format!("{id} ({}): malformed pending queue", gw.label));
            }
        }
        let mut wrapped: Vec<TokenId> = self.list.iter().map(|g| g.token_wt).collect();
        wrapped.sort();
        wrapped.dedup();
        for wt in wrapped {
            let issued: u128 = self.for_wrapped(wt).map(|(_, g)| g.issued.as_u128()).sum();
            let supply = ledger.supply_of(wt);
            if issued != supply.as_u128() {
                return Err(format!("{wt}: gateways issued {issued} but ledger supply is {supply}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        ledger: Ledger,
        gws: Gateways,
        origin: ChainId,
        dest: ChainId,
        t: TokenId,
        wt: TokenId,
        rgu: TokenId,
        user: AccountId,
        provider: AccountId,
    }

    fn fixture(latency: u64, multi: bool) -> (Fixture, GatewayId) {
        let mut ledger = Ledger::new();
        let origin = ledger.register_chain("origin").unwrap();
        let dest = ledger.register_chain("dest").unwrap();
        let t = ledger.register_token(origin, "T", TokenKind::Origin).unwrap();
        let wt = ledger
            .register_token(dest, "wT", TokenKind::Wrapped { underlying: t, origin_chain: origin })
            .unwrap();
        let rgu = ledger.register_token(dest, "RGU", TokenKind::Rgu).unwrap();
        let user = ledger.account("user");
        let provider = ledger.account("provA");
        ledger.mint(origin, t, user, Amount(1_000)).unwrap();
        ledger.mint(dest, rgu, user, Amount::tokens(10)).unwrap();
        let mut gws = Gateways::new(multi);
        let id = gws
            .register(
                &mut ledger,
                GatewayConfig {
                    label: "g0".into(),
                    origin_chain: origin,
                    dest_chain: dest,
                    token_t: t,
                    token_wt: wt,
                    provider,
                    latency_ticks: latency,
                    unwrap_fee_flat_rgu: Amount::tokens(1),
                },
            )
            .unwrap();
        (
            Fixture { ledger, gws, origin, dest, t, wt, rgu, user, provider },
            id,
        )
    }

    fn cfg(f: &Fixture, label: &str) -> GatewayConfig {
        GatewayConfig {
            label: label.into(),
            origin_chain: f.origin,
            dest_chain: f.dest,
            token_t: f.t,
            token_wt: f.wt,
            provider: f.provider,
            latency_ticks: 0,
            unwrap_fee_flat_rgu: Amount::tokens(1),
        }
    }

    #[test]
    fn register_rules() {
        let (mut f, id) = fixture(0, false);
        assert_eq!(id, GatewayId(0));
        let c = cfg(&f, "g1");
        assert_eq!(
            f.gws.register(&mut f.ledger, c),
            Err(GatewayError::DuplicateGateway(f.wt))
        );
        let other = f.ledger.register_token(f.origin, "U", TokenKind::Origin).unwrap();
        let mut c = cfg(&f, "g1");
        c.token_t = other;
        f.gws.allow_multiple = true;
        assert!(matches!(
            f.gws.register(&mut f.ledger, c),
            Err(GatewayError::InconsistentTokenPair(_))
        ));
        let c = cfg(&f, "g1");
        assert_eq!(f.gws.register(&mut f.ledger, c), Ok(GatewayId(1)));
    }

    #[test]
    fn lock_with_zero_latency() {
        let (mut f, id) = fixture(0, false);
        f.gws.lock(&mut f.ledger, id, f.user, Amount(500), 3).unwrap();
        assert_eq!(f.gws.process_pending(&mut f.ledger, id, 3), Ok(1));
        let gw = f.gws.get(id).unwrap();
        assert_eq!(gw.escrow(), Amount(500));
        assert_eq!(f.ledger.supply_of(f.wt), Amount(500));
        assert_eq!(f.ledger.balance(f.wt, f.user), Amount(500));
        f.gws.audit(&f.ledger).unwrap();
    }

    #[test]
    fn lock_with_latency_delays_mint() {
        let (mut f, id) = fixture(2, false);
        f.gws.lock(&mut f.ledger, id, f.user, Amount(500), 10).unwrap();
        let gw = f.gws.get(id).unwrap();
        assert_eq!(gw.escrow(), Amount(500));
        assert_eq!(f.ledger.supply_of(f.wt), Amount(0));
        let pending: Vec<_> = gw.pending().cloned().collect();
        assert_eq!(pending.len(), 1);
        assert_eq!(pending[0].mature_at, 12);
        f.gws.audit(&f.ledger).unwrap();
        assert_eq!(f.gws.process_pending(&mut f.ledger, id, 11), Ok(0));
        assert_eq!(f.gws.process_pending(&mut f.ledger, id, 12), Ok(1));
        assert_eq!(f.ledger.supply_of(f.wt), Amount(500));
    }

    #[test]
    fn zero_amounts_rejected() {
        let (mut f, id) = fixture(0, false);
        assert_eq!(f.gws.lock(&mut f.ledger, id, f.user, Amount(0), 0), Err(GatewayError::ZeroAmount));
        assert_eq!(f.gws.unwrap(&mut f.ledger, id, f.user, Amount(0), 0), Err(GatewayError::ZeroAmount));
    }

    #[test]
    fn unwrap_burns_fee_and_releases() {
        let (mut f, id) = fixture(0, false);
        f.gws.lock(&mut f.ledger, id, f.user, Amount(500), 0).unwrap();
        f.gws.process_pending(&mut f.ledger, id, 0).unwrap();
        let rgu_before = f.ledger.supply_of(f.rgu);
        let fee = f.gws.unwrap(&mut f.ledger, id, f.user, Amount(200), 1).unwrap();
        assert_eq!(fee, Amount(1_000000));
        f.gws.process_pending(&mut f.ledger, id, 1).unwrap();
        assert_eq!(f.gws.get(id).unwrap().escrow(), Amount(300));
        assert_eq!(f.ledger.supply_of(f.wt), Amount(300));
        assert_eq!(f.ledger.supply_of(f.rgu), Amount(rgu_before.0 - 1_000000));
        assert_eq!(f.gws.fees_burned(), Amount(1_000000));
        assert_eq!(f.ledger.balance(f.t, f.user), Amount(700));
        f.gws.audit(&f.ledger).unwrap();
    }

    #[test]
    fn unwrap_without_rgu_is_rejected_atomically() {
        let (mut f, id) = fixture(0, false);
        f.gws.lock(&mut f.ledger, id, f.user, Amount(500), 0).unwrap();
        f.gws.process_pending(&mut f.ledger, id, 0).unwrap();
        let rgu_all = f.ledger.balance(f.rgu, f.user);
        f.ledger.burn(f.dest, f.rgu, f.user, rgu_all).unwrap();
        let (l0, g0) = (f.ledger.clone(), f.gws.clone());
        assert!(matches!(
            f.gws.unwrap(&mut f.ledger, id, f.user, Amount(100), 1),
            Err(GatewayError::InsufficientRguForFee { .. })
        ));
        assert_eq!(f.ledger, l0);
        assert_eq!(f.gws, g0);
    }

    #[test]
    fn full_round_trip_restores_balances() {
        // unwrap the whole wT balance, let it release, then lock it back
        let (mut f, id) = fixture(0, false);
        f.gws.lock(&mut f.ledger, id, f.user, Amount(500), 0).unwrap();
        f.gws.process_pending(&mut f.ledger, id, 0).unwrap();
        let escrow0 = f.gws.get(id).unwrap().escrow();
        let wt0 = f.ledger.supply_of(f.wt);
        let t0 = f.ledger.balance(f.t, f.user);
        let rgu0 = f.ledger.supply_of(f.rgu);

        f.gws.unwrap(&mut f.ledger, id, f.user, Amount(500), 1).unwrap();
        f.gws.process_pending(&mut f.ledger, id, 1).unwrap();
        assert_eq!(f.gws.get(id).unwrap().escrow(), Amount(0));
        f.gws.lock(&mut f.ledger, id, f.user, Amount(500), 2).unwrap();
        f.gws.process_pending(&mut f.ledger, id, 2).unwrap();

        assert_eq!(f.gws.get(id).unwrap().escrow(), escrow0);
        assert_eq!(f.ledger.supply_of(f.wt), wt0);
        assert_eq!(f.ledger.balance(f.t, f.user), t0);
        assert_eq!(f.ledger.supply_of(f.rgu), Amount(rgu0.0 - 1_000000));
    }

    #[test]
    fn process_pending_order_and_idempotence() {
        let (mut f, id) = fixture(1, false);
        let other = f.ledger.account("other");
        f.ledger.mint(f.origin, f.t, other, Amount(50)).unwrap();
        assert_eq!(f.gws.process_pending(&mut f.ledger, id, 0), Ok(0));
        f.gws.lock(&mut f.ledger, id, f.user, Amount(10), 4).unwrap();
        f.gws.lock(&mut f.ledger, id, other, Amount(20), 4).unwrap();
        let order: Vec<_> = f.gws.get(id).unwrap().pending().map(|p| p.beneficiary).collect();
        assert_eq!(order, vec![f.user, other]);
        assert_eq!(f.gws.process_pending(&mut f.ledger, id, 5), Ok(2));
        let snapshot = (f.ledger.clone(), f.gws.clone());
        assert_eq!(f.gws.process_pending(&mut f.ledger, id, 5), Ok(0));
        assert_eq!((f.ledger.clone(), f.gws.clone()), snapshot);
        assert_eq!(f.ledger.balance(f.wt, f.user), Amount(10));
        assert_eq!(f.ledger.balance(f.wt, other), Amount(20));
    }

    #[test]
    fn outstanding_ignores_queued_unlocks() {
        let (mut f, id) = fixture(3, false);
        f.gws.genesis_issue(&mut f.ledger, id, f.user, Amount(400)).unwrap();
        f.gws.lock(&mut f.ledger, id, f.user, Amount(100), 0).unwrap();
        f.gws.unwrap(&mut f.ledger, id, f.user, Amount(100), 0).unwrap();
        let gw = f.gws.get(id).unwrap();
        assert_eq!(gw.escrow(), Amount(500));
        assert_eq!(gw.outstanding(), Amount(400));
        f.gws.audit(&f.ledger).unwrap();
    }

    #[test]
    fn unwrap_limited_to_gateway_issuance() {
        let (mut f, g0) = fixture(0, true);
        let c = cfg(&f, "g1");
        let g1 = f.gws.register(&mut f.ledger, c).unwrap();
        f.gws.genesis_issue(&mut f.ledger, g0, f.user, Amount(300)).unwrap();
        f.gws.genesis_issue(&mut f.ledger, g1, f.user, Amount(100)).unwrap();
        assert!(matches!(
            f.gws.unwrap(&mut f.ledger, g1, f.user, Amount(101), 0),
            Err(GatewayError::ExceedsIssued { .. })
        ));
        f.gws.unwrap(&mut f.ledger, g1, f.user, Amount(100), 0).unwrap();
        f.gws.process_pending(&mut f.ledger, g1, 0).unwrap();
        f.gws.audit(&f.ledger).unwrap();
    }
}
