use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::amount::{format_ratio, Amount, Price, Tick};
use crate::governance::{ProposalId, ProposalStatus};
use crate::ledger::{AccountId, TokenId, TokenKind};
use crate::protocol::{GovEvent, InvariantViolation, Protocol, ProtocolError};

use super::agents::Agent;
use super::feeds::Feed;
use super::metrics::MetricsTable;
use super::scenario::{Action, Scenario, ScheduledAction, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario:\n{0}")]
    Validation(#[from] ValidationError),
    #[error("tick {tick}: {violation}")]
    Invariant { tick: Tick, violation: InvariantViolation },
    #[error("tick {tick}: agent {agent} failed: {source}")]
    Agent { tick: Tick, agent: u32, source: ProtocolError },
    #[error("tick {tick}: schedule[{index}] failed: {source}")]
    Schedule { tick: Tick, index: usize, source: ProtocolError },
    #[error("tick {tick}: {phase} failed: {source}")]
    Engine { tick: Tick, phase: &'static str, source: ProtocolError },
}

impl SimError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Validation(_) => 2,
            SimError::Invariant { .. } => 3,
            SimError::Agent { .. } | SimError::Schedule { .. } | SimError::Engine { .. } => 4,
        }
    }
}

/// End-of-run totals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub ticks: u64,
    pub audits: u64,
    pub rgu_genesis: u128,
    pub rgu_supply: Amount,
    pub emitted: u128,
    pub claimed: u128,
    pub fees_burned: Amount,
    pub deposits_burned: Amount,
    pub residual: u128,
    pub token_supplies: Vec<(String, Amount)>,
    pub proposals: Vec<(ProposalId, ProposalStatus)>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ticks: {}", self.ticks)?;
        writeln!(f, "invariant audits: {} passed", self.audits)?;
        for (name, supply) in &self.token_supplies {
            writeln!(f, "supply {name}: {supply}")?;
        }
        writeln!(
            f,
            "rgu: genesis {} emitted {} claimed {} fee burns {} deposit burns {} residual {}",
            self.rgu_genesis, self.emitted, self.claimed, self.fees_burned, self.deposits_burned, self.residual
        )?;
        for (id, status) in &self.proposals {
            writeln!(f, "{id}: {status:?}")?;
        }
        Ok(())
    }
}

/// Output of a complete run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: MetricsTable,
    pub summary: RunSummary,
}

/// A scenario in progress. Each [`step`](Simulation::step) runs one tick
/// through the fixed phase order:
///
/// 1. mature gateway transfers, gateways in id order;
/// 2. agents act in id order;
/// 3. rewards accrue for the tick;
/// 4. governance applies due proposals, then finalizes closed ones;
/// 5. scheduled actions run in file order;
/// 6. a metrics row is recorded.
#[derive(Clone, Debug)]
pub struct Simulation {
    protocol: Protocol,
    agents: Vec<Agent>,
    feeds: Vec<Feed>,
    feed_pairs: Vec<(TokenId, TokenId)>,
    numeraire: Option<TokenId>,
    schedule: Vec<ScheduledAction>,
    cursor: usize,
    ticks: u64,
    audit_every: u64,
    next: Tick,
    audits: u64,
    slippage_ref: Amount,
    pool_ids: Vec<crate::amm::PoolId>,
    gateway_ids: Vec<crate::gateway::GatewayId>,
    metrics: MetricsTable,
    gov_events: Vec<(Tick, GovEvent)>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, SimError> {
        let genesis = scenario.genesis()?;
        let agents = genesis
            .agents
            .into_iter()
            .map(|spec| {
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                rng.set_stream(u64::from(spec.id));
                Agent::new(spec, rng)
            })
            .collect::<Vec<_>>();
        let protocol = genesis.protocol;
        let pool_ids: Vec<_> = protocol.amm().iter().map(|(id, _)| id).collect();
        let gateway_ids: Vec<_> = protocol.gateways().iter().map(|(id, _)| id).collect();
        let mut columns = vec!["tick".to_string()];
        for (_, p) in protocol.amm().iter() {
            for c in ["reserve_w", "reserve_o", "spot", "slippage"] {
                columns.push(format!("{}.{c}", p.label));
            }
        }
        for (_, g) in protocol.gateways().iter() {
            for c in ["escrow", "outstanding"] {
                columns.push(format!("{}.{c}", g.label));
            }
        }
        for c in ["supply", "emitted", "claimed", "burned", "residual"] {
            columns.push(format!("rgu.{c}"));
        }
        if genesis.numeraire.is_some() {
            for a in &agents {
                columns.push(format!("agent{}.wealth", a.spec.id));
            }
        }
        protocol
            .audit()
            .map_err(|violation| SimError::Invariant { tick: 0, violation })?;
        Ok(Simulation {
            protocol,
            agents,
            feeds: genesis.feeds,
            feed_pairs: genesis.feed_pairs,
            numeraire: genesis.numeraire,
            schedule: genesis.schedule,
            cursor: 0,
            ticks: scenario.ticks,
            audit_every: scenario.audit_every,
            next: 0,
            audits: 0,
            slippage_ref: scenario.slippage_ref(),
            pool_ids,
            gateway_ids,
            metrics: MetricsTable { columns, rows: Vec::new() },
            gov_events: Vec::new(),
        })
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn metrics(&self) -> &MetricsTable {
        &self.metrics
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn governance_events(&self) -> &[(Tick, GovEvent)] {
        &self.gov_events
    }

    /// Next tick to run.
    pub fn tick(&self) -> Tick {
        self.next
    }

    pub fn total_ticks(&self) -> u64 {
        self.ticks
    }

    pub fn is_finished(&self) -> bool {
        self.next >= self.ticks
    }

    /// Feed price at `tick`.
    pub fn feed_price(&mut self, feed: usize, tick: Tick) -> Price {
        self.feeds[feed].price_at(tick)
    }

    /// Run one tick, auditing when it closes an audit window.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.next;
        let engine = |phase: &'static str| move |source| SimError::Engine { tick: t, phase, source };
        self.protocol.process_all_pending(t).map_err(engine("process_pending"))?;
        for agent in &mut self.agents {
            agent
                .act(&mut self.protocol, &mut self.feeds, t)
                .map_err(|source| SimError::Agent { tick: t, agent: agent.spec.id, source })?;
        }
        self.protocol.accrue(t).map_err(engine("accrue"))?;
        let events = self.protocol.governance_phase(t).map_err(engine("governance"))?;
        self.gov_events.extend(events.into_iter().map(|e| (t, e)));
        while let Some(item) = self.schedule.get(self.cursor) {
            if item.tick > t {
                break;
            }
            let item = item.clone();
            self.cursor += 1;
            if item.tick < t {
                continue;
            }
            self.run_action(&item.action)
                .map_err(|source| SimError::Schedule { tick: t, index: item.index, source })?;
        }
        let row = self.row(t);
        self.metrics.rows.push(row);
        self.next += 1;
        if self.next.is_multiple_of(self.audit_every) {
            self.audit()?;
        }
        Ok(())
    }

    /// Audit every invariant now.
    pub fn audit(&mut self) -> Result<(), SimError> {
        let tick = self.next.saturating_sub(1);
        self.protocol
            .audit()
            .map_err(|violation| SimError::Invariant { tick, violation })?;
        self.audits += 1;
        Ok(())
    }

    /// Run the remaining ticks and a final audit.
    pub fn run_to_end(&mut self) -> Result<RunSummary, SimError> {
        while !self.is_finished() {
            self.step()?;
        }
        if !self.next.is_multiple_of(self.audit_every) || self.next == 0 {
            self.audit()?;
        }
        Ok(self.summary())
    }

    fn run_action(&mut self, action: &Action) -> Result<(), ProtocolError> {
        let t = self.next;
        match action {
            Action::Submit { account, deposit, kind } => {
                self.protocol.submit(*account, kind.clone(), *deposit, t)?;
            }
            Action::Vote { account, proposal, support } => {
                self.protocol.vote(ProposalId(*proposal), *account, *support, t)?;
            }
            Action::ClaimLp { account, pool } => {
                self.protocol.claim_lp(*pool, *account)?;
            }
            Action::ClaimGateway { gateway } => {
                self.protocol.claim_gateway(*gateway)?;
            }
        }
        Ok(())
    }

    fn marks(&mut self, t: Tick) -> BTreeMap<TokenId, Price> {
        let mut marks = BTreeMap::new();
        let Some(numeraire) = self.numeraire else { return marks };
        marks.insert(numeraire, Price::one());
        for (i, (base, quote)) in self.feed_pairs.iter().enumerate() {
            if *quote == numeraire && !marks.contains_key(base) {
                marks.insert(*base, self.feeds[i].price_at(t));
            }
        }
        // a wrapped token and its underlying trade one for one
        for info in self.protocol.ledger().tokens() {
            if let TokenKind::Wrapped { underlying, .. } = info.kind {
                match (marks.get(&info.id).cloned(), marks.get(&underlying).cloned()) {
                    (Some(m), None) => {
                        marks.insert(underlying, m);
                    }
                    (None, Some(m)) => {
                        marks.insert(info.id, m);
                    }
                    _ => {}
                }
            }
        }
        marks
    }

    /// Value of an account's balances and pool shares at the given marks,
    /// floored to minimal units.
    pub fn wealth(&self, account: AccountId, marks: &BTreeMap<TokenId, Price>) -> BigInt {
        let ledger = self.protocol.ledger();
        let mut total = Price::zero();
        for (token, mark) in marks {
            let held = ledger
                .token(*token)
                .and_then(|t| ledger.balance_of(t.home_chain, *token, account))
                .unwrap_or_default();
            total += held.to_ratio() * mark;
        }
        for (_, pool) in self.protocol.amm().iter() {
            let shares = pool.shares_of(account);
            if shares == 0 {
                continue;
            }
            let (rw, ro) = pool.reserves();
            let zero = Price::zero();
            let value = rw.to_ratio() * marks.get(&pool.token_w).unwrap_or(&zero)
                + ro.to_ratio() * marks.get(&pool.token_o).unwrap_or(&zero);
            total += value * Price::new(BigInt::from(shares), BigInt::from(pool.total_shares()));
        }
        total.floor().to_integer()
    }

    fn row(&mut self, t: Tick) -> Vec<String> {
        let mut row = Vec::with_capacity(self.metrics.columns.len());
        row.push(t.to_string());
        for id in &self.pool_ids {
            let pool = self.protocol.amm().get(*id).expect("genesis pool");
            let (rw, ro) = pool.reserves();
            row.push(rw.to_string());
            row.push(ro.to_string());
            row.push(pool.spot_price().map(|p| format_ratio(&p)).unwrap_or_default());
            row.push(
                pool.quote_slippage(self.slippage_ref)
                    .map(|p| format_ratio(&p))
                    .unwrap_or_default(),
            );
        }
        for id in &self.gateway_ids {
            let g = self.protocol.gateways().get(*id).expect("genesis gateway");
            row.push(g.escrow().to_string());
            row.push(g.outstanding().to_string());
        }
        let p = &self.protocol;
        let conservation = p.rewards().conservation(p.amm()).ok();
        let residual = conservation
            .map(|c| (c.residual_scaled + c.pending_fraction_scaled) / crate::rewards::PRECISION)
            .unwrap_or_default();
        row.push(p.rgu_supply().to_string());
        row.push(p.rewards().emitted().to_string());
        row.push(p.rewards().claimed().to_string());
        row.push(p.rgu_burned().to_string());
        row.push(residual.to_string());
        if self.numeraire.is_some() {
            let marks = self.marks(t);
            let accounts: Vec<AccountId> = self.agents.iter().map(|a| a.spec.account).collect();
            for account in accounts {
                row.push(self.wealth(account, &marks).to_string());
            }
        }
        row
    }

    pub fn summary(&self) -> RunSummary {
        let p = &self.protocol;
        let ledger = p.ledger();
        let token_supplies = ledger
            .tokens()
            .iter()
            .map(|t| {
                let chain = ledger.chain_name(t.home_chain).unwrap_or("?");
                let supply = ledger.total_supply(t.home_chain, t.id).unwrap_or_default();
                (format!("{}@{chain}", t.symbol), supply)
            })
            .collect();
        let residual = p
            .rewards()
            .conservation(p.amm())
            .ok()
            .and_then(|c| c.residual())
            .unwrap_or_default();
        RunSummary {
            ticks: self.next,
            audits: self.audits,
            rgu_genesis: p.rgu_genesis(),
            rgu_supply: p.rgu_supply(),
            emitted: p.rewards().emitted(),
            claimed: p.rewards().claimed(),
            fees_burned: p.gateways().fees_burned(),
            deposits_burned: p.governance().deposits_burned(),
            residual,
            token_supplies,
            proposals: p.governance().proposals().iter().map(|pr| (pr.id, pr.status)).collect(),
        }
    }
}

/// Run a scenario from genesis to its last tick.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(scenario)?;
    let summary = sim.run_to_end()?;
    Ok(RunOutput { metrics: sim.metrics, summary })
}
