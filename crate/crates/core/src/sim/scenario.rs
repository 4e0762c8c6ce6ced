//! Scenario files: TOML parsing, strict validation, and construction of the
//! genesis state.
//!
//! Every section rejects unknown keys. Cross-references are by name: chains
//! by name, tokens as `SYMBOL@chain`, gateways, pools and feeds by label,
//! accounts by plain label. Amounts are integers in minimal units; prices and
//! rates are strings holding an integer, a fraction `a/b`, or a decimal.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::amm::{PoolConfig, PoolId, DEFAULT_FEE_BPS};
use crate::amount::{parse_price, Amount, Price, Tick, UNIT};
use crate::gateway::{GatewayConfig, GatewayId};
use crate::governance::{GovError, GovParams, ParamKey, ProposalKind};
use crate::ledger::{AccountId, ChainId, TokenId, TokenKind};
use crate::protocol::{Protocol, ProtocolConfig, ProtocolError};
use crate::rewards::{EmissionSchedule, RewardConfig, RewardError};

use super::agents::{AgentKind, AgentSpec, BridgePolicy};
use super::feeds::{Feed, Series};

// ---- file schema ------------------------------------------------------

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub run: RunSection,
    #[serde(default)]
    pub chains: ChainsSection,
    #[serde(default)]
    pub tokens: Vec<TokenEntry>,
    #[serde(default)]
    pub gateways: Vec<GatewayEntry>,
    #[serde(default)]
    pub pools: Vec<PoolEntry>,
    #[serde(default)]
    pub balances: Vec<BalanceEntry>,
    #[serde(default)]
    pub emission: EmissionSection,
    #[serde(default)]
    pub rewards: RewardsSection,
    #[serde(default)]
    pub governance: GovernanceSection,
    #[serde(default)]
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub feeds: Vec<FeedEntry>,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
}

fn one() -> u64 {
    1
}

fn unit() -> u64 {
    UNIT
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub ticks: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub audit_every: u64,
    #[serde(default)]
    pub multi_gateway: bool,
    /// Trade size, in wrapped minimal units, for the slippage column.
    #[serde(default = "unit")]
    pub slippage_ref: u64,
    /// Token that agent wealth is expressed in. Defaults to the quote token
    /// of the first feed.
    #[serde(default)]
    pub numeraire: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainsSection {
    #[serde(default)]
    pub names: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKindEntry {
    Origin,
    Wrapped,
    Rgu,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEntry {
    pub symbol: String,
    pub chain: String,
    pub kind: TokenKindEntry,
    #[serde(default)]
    pub underlying: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayEntry {
    pub label: String,
    /// Origin token locked in escrow.
    pub token: String,
    /// Wrapped token issued on the destination chain.
    pub wrapped: String,
    pub provider: String,
    #[serde(default)]
    pub latency: u64,
    #[serde(default)]
    pub unwrap_fee: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolGenesis {
    pub account: String,
    pub amount_w: u64,
    pub amount_o: u64,
}

fn default_fee() -> u32 {
    DEFAULT_FEE_BPS
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    pub label: String,
    pub token_w: String,
    pub token_o: String,
    #[serde(default = "default_fee")]
    pub fee_bps: u32,
    #[serde(default = "one")]
    pub weight: u64,
    /// Liquidity deposited before tick 0, drawn from the account's balances.
    #[serde(default)]
    pub genesis: Option<PoolGenesis>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceEntry {
    pub account: String,
    pub token: String,
    pub amount: u64,
    /// Gateway backing a wrapped balance. Required for wrapped tokens.
    #[serde(default)]
    pub via: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionSection {
    #[serde(default)]
    pub e0: u64,
    #[serde(default = "one")]
    pub decay_num: u64,
    #[serde(default = "one")]
    pub decay_den: u64,
    #[serde(default = "one")]
    pub period_ticks: u64,
}

impl Default for EmissionSection {
    fn default() -> Self {
        EmissionSection { e0: 0, decay_num: 1, decay_den: 1, period_ticks: 1 }
    }
}

fn default_lp_fraction() -> u32 {
    8_000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardsSection {
    #[serde(default = "default_lp_fraction")]
    pub lp_fraction_bps: u32,
}

impl Default for RewardsSection {
    fn default() -> Self {
        RewardsSection { lp_fraction_bps: default_lp_fraction() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernanceSection {
    #[serde(default)]
    pub deposit_min: u64,
    #[serde(default = "default_voting_period")]
    pub voting_period: u64,
    #[serde(default = "default_quorum")]
    pub quorum_bps: u32,
    #[serde(default = "default_threshold")]
    pub threshold_bps: u32,
}

fn default_voting_period() -> u64 {
    10
}

fn default_quorum() -> u32 {
    4_000
}

fn default_threshold() -> u32 {
    5_000
}

impl Default for GovernanceSection {
    fn default() -> Self {
        GovernanceSection {
            deposit_min: 0,
            voting_period: default_voting_period(),
            quorum_bps: default_quorum(),
            threshold_bps: default_threshold(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentEntry {
    Arbitrageur {
        account: String,
        pool: String,
        feed: String,
        #[serde(default)]
        min_profit: u64,
    },
    RandomTrader {
        account: String,
        pool: String,
        /// Expected trades per tick, e.g. `"3/2"`.
        intensity: String,
        max_size: u64,
    },
    LiquidityProvider {
        account: String,
        pool: String,
        enter_tick: u64,
        #[serde(default)]
        exit_tick: Option<u64>,
        amount_w: u64,
        /// Counter-token amount, used only if the pool is empty on entry.
        #[serde(default)]
        amount_o: Option<u64>,
        #[serde(default)]
        claim_every: Option<u64>,
    },
    Bridger {
        account: String,
        gateway: String,
        amount: u64,
        policy: BridgePolicy,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointEntry {
    pub tick: u64,
    pub price: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedEntry {
    Constant {
        label: String,
        base: String,
        quote: String,
        price: String,
    },
    Piecewise {
        label: String,
        base: String,
        quote: String,
        points: Vec<PointEntry>,
    },
    GeometricWalk {
        label: String,
        base: String,
        quote: String,
        p0: String,
        step_bps: u32,
    },
}

impl FeedEntry {
    fn header(&self) -> (&str, &str, &str) {
        match self {
            FeedEntry::Constant { label, base, quote, .. }
            | FeedEntry::Piecewise { label, base, quote, .. }
            | FeedEntry::GeometricWalk { label, base, quote, .. } => (label, base, quote),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleEntry {
    Submit {
        tick: u64,
        account: String,
        deposit: u64,
        proposal: PayloadEntry,
    },
    Vote {
        tick: u64,
        account: String,
        /// Index of the proposal among the file's `submit` actions.
        proposal: u32,
        support: bool,
    },
    ClaimLp {
        tick: u64,
        account: String,
        pool: String,
    },
    ClaimGateway {
        tick: u64,
        gateway: String,
    },
}

impl ScheduleEntry {
    pub fn tick(&self) -> u64 {
        match self {
            ScheduleEntry::Submit { tick, .. }
            | ScheduleEntry::Vote { tick, .. }
            | ScheduleEntry::ClaimLp { tick, .. }
            | ScheduleEntry::ClaimGateway { tick, .. } => *tick,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayloadEntry {
    ParamChange {
        key: String,
        /// Pool or gateway label for per-entity keys.
        #[serde(default)]
        target: Option<String>,
        value: u64,
    },
    AddPool {
        label: String,
        token_w: String,
        token_o: String,
        #[serde(default = "default_fee")]
        fee_bps: u32,
        #[serde(default = "one")]
        weight: u64,
    },
    AddToken {
        symbol: String,
        chain: String,
        token_kind: TokenKindEntry,
        #[serde(default)]
        underlying: Option<String>,
    },
    AddGateway {
        label: String,
        token: String,
        wrapped: String,
        provider: String,
        #[serde(default)]
        latency: u64,
        #[serde(default)]
        unwrap_fee: u64,
    },
    Text {
        text: String,
    },
}

// ---- validation errors ------------------------------------------------

/// One problem found in a scenario, located by key path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError {
    pub issues: Vec<Issue>,
}

impl ValidationError {
    fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationError { issues: vec![Issue { path: path.into(), message: message.into() }] }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            if issue.path.is_empty() {
                write!(f, "{}", issue.message)?;
            } else {
                write!(f, "{}: {}", issue.path, issue.message)?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[derive(Default)]
struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl fmt::Display) {
        self.0.push(Issue { path: path.into(), message: message.to_string() });
    }

    fn take<T, E: fmt::Display>(&mut self, path: impl Into<String>, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(path, e);
                None
            }
        }
    }

    fn finish(self) -> Result<(), ValidationError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { issues: self.0 })
        }
    }
}

fn check_label(label: &str) -> Result<(), String> {
    if label.is_empty() {
        return Err("must be nonempty".into());
    }
    if !label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) {
        return Err(format!("{label:?} may contain only ASCII letters, digits, '_', '-' and '.'"));
    }
    Ok(())
}

fn parse_rate(text: &str) -> Result<Price, String> {
    if text.trim() == "0" {
        return Ok(Price::zero());
    }
    parse_price(text)
}

fn parse_series(f: &FeedEntry) -> Result<Series, String> {
    match f {
        FeedEntry::Constant { price, .. } => parse_price(price).map(Series::Constant),
        FeedEntry::Piecewise { points, .. } => points
            .iter()
            .map(|p| parse_price(&p.price).map(|v| (p.tick, v)))
            .collect::<Result<Vec<_>, _>>()
            .map(Series::Piecewise),
        FeedEntry::GeometricWalk { p0, step_bps, .. } => {
            parse_price(p0).map(|p0| Series::GeometricWalk { p0, step_bps: *step_bps })
        }
    }
}

// ---- resolved scenario ------------------------------------------------

/// A scheduled governance or claim action with references resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Submit { account: AccountId, deposit: Amount, kind: ProposalKind },
    Vote { account: AccountId, proposal: u32, support: bool },
    ClaimLp { account: AccountId, pool: PoolId },
    ClaimGateway { gateway: GatewayId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduledAction {
    pub tick: Tick,
    /// Position in the file's `[[schedule]]` array.
    pub index: usize,
    pub action: Action,
}

/// Genesis state and resolved actors, ready to run.
#[derive(Clone, Debug)]
pub struct Genesis {
    pub protocol: Protocol,
    pub agents: Vec<AgentSpec>,
    pub feeds: Vec<Feed>,
    /// `(base, quote)` per feed.
    pub feed_pairs: Vec<(TokenId, TokenId)>,
    pub schedule: Vec<ScheduledAction>,
    pub numeraire: Option<TokenId>,
}

/// Stream ids for feed RNGs sit above every possible agent id.
pub const FEED_STREAM_BASE: u64 = 1 << 32;

/// A parsed, validated scenario plus run overrides.
#[derive(Clone, Debug)]
pub struct Scenario {
    file: ScenarioFile,
    pub ticks: u64,
    pub seed: u64,
    pub audit_every: u64,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ValidationError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ValidationError::single("", e.to_string().trim_end().to_string()))?;
        let scenario = Scenario {
            ticks: file.run.ticks,
            seed: file.run.seed,
            audit_every: file.run.audit_every,
            file,
        };
        scenario.genesis()?;
        Ok(scenario)
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    /// Modify the underlying file and revalidate. Overrides are kept.
    pub fn edit(&self, f: impl FnOnce(&mut ScenarioFile)) -> Result<Self, ValidationError> {
        let mut next = self.clone();
        f(&mut next.file);
        next.genesis()?;
        Ok(next)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ticks(mut self, ticks: u64) -> Self {
        self.ticks = ticks;
        self
    }

    pub fn with_audit_every(mut self, k: u64) -> Result<Self, ValidationError> {
        if k == 0 {
            return Err(ValidationError::single("run.audit_every", "must be at least 1"));
        }
        self.audit_every = k;
        Ok(self)
    }

    pub fn slippage_ref(&self) -> Amount {
        Amount(self.file.run.slippage_ref)
    }

    /// Build the genesis state, reporting every problem found.
    pub fn genesis(&self) -> Result<Genesis, ValidationError> {
        Builder::new(self)?.build()
    }
}

struct Builder<'a> {
    scenario: &'a Scenario,
    file: &'a ScenarioFile,
    protocol: Protocol,
    issues: Issues,
    feeds: BTreeMap<String, usize>,
}

impl<'a> Builder<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, ValidationError> {
        let file = &scenario.file;
        let mut issues = Issues::default();
        if scenario.audit_every == 0 {
            issues.push("run.audit_every", "must be at least 1");
        }
        if file.run.slippage_ref == 0 {
            issues.push("run.slippage_ref", "must be positive");
        }
        let e = &file.emission;
        let config = ProtocolConfig {
            multi_gateway: file.run.multi_gateway,
            emission: EmissionSchedule {
                e0: Amount(e.e0),
                decay_num: e.decay_num,
                decay_den: e.decay_den,
                period_ticks: e.period_ticks,
            },
            rewards: RewardConfig { lp_fraction_bps: file.rewards.lp_fraction_bps },
            governance: GovParams {
                deposit_min: Amount(file.governance.deposit_min),
                voting_period: file.governance.voting_period,
                quorum_bps: file.governance.quorum_bps,
                threshold_bps: file.governance.threshold_bps,
            },
        };
        let protocol = match Protocol::new(config) {
            Ok(p) => p,
            Err(err) => {
                let path = match &err {
                    ProtocolError::Reward(RewardError::InvalidLpFraction(_)) => "rewards.lp_fraction_bps",
                    ProtocolError::Reward(_) => "emission",
                    ProtocolError::Governance(GovError::InvalidParams(_)) => "governance",
                    _ => "",
                };
                issues.push(path, err);
                return Err(ValidationError { issues: issues.0 });
            }
        };
        issues.finish()?;
        Ok(Builder { scenario, file, protocol, issues: Issues::default(), feeds: BTreeMap::new() })
    }

    fn chain(&self, name: &str) -> Result<ChainId, String> {
        self.protocol
            .ledger()
            .find_chain(name)
            .ok_or_else(|| format!("unknown chain {name:?}"))
    }

    fn token(&self, reference: &str) -> Result<TokenId, String> {
        let (symbol, chain) = reference
            .rsplit_once('@')
            .ok_or_else(|| format!("token reference {reference:?} must look like SYMBOL@chain"))?;
        let chain = self.chain(chain)?;
        self.protocol
            .ledger()
            .find_token(chain, symbol)
            .ok_or_else(|| format!("unknown token {reference:?}"))
    }

    fn pool(&self, label: &str) -> Result<PoolId, String> {
        self.protocol.amm().find(label).ok_or_else(|| format!("unknown pool {label:?}"))
    }

    fn gateway(&self, label: &str) -> Result<GatewayId, String> {
        self.protocol
            .gateways()
            .find(label)
            .ok_or_else(|| format!("unknown gateway {label:?}"))
    }

    fn feed(&self, label: &str) -> Result<usize, String> {
        self.feeds.get(label).copied().ok_or_else(|| format!("unknown feed {label:?}"))
    }

    fn account(&mut self, label: &str) -> Result<AccountId, String> {
        check_label(label)?;
        Ok(self.protocol.account(label))
    }

    fn token_kind(&self, kind: TokenKindEntry, underlying: Option<&str>) -> Result<TokenKind, (String, String)> {
        match (kind, underlying) {
            (TokenKindEntry::Origin, None) => Ok(TokenKind::Origin),
            (TokenKindEntry::Rgu, None) => Ok(TokenKind::Rgu),
            (TokenKindEntry::Wrapped, Some(u)) => {
                let underlying = self.token(u).map_err(|e| ("underlying".to_string(), e))?;
                let origin_chain = self
                    .protocol
                    .ledger()
                    .token(underlying)
                    .map_err(|e| ("underlying".to_string(), e.to_string()))?
                    .home_chain;
                Ok(TokenKind::Wrapped { underlying, origin_chain })
            }
            (TokenKindEntry::Wrapped, None) => Err(("underlying".into(), "required for wrapped tokens".into())),
            (_, Some(_)) => Err(("underlying".into(), "allowed only for wrapped tokens".into())),
        }
    }

    fn gateway_config(
        &mut self,
        label: &str,
        token: &str,
        wrapped: &str,
        provider: &str,
        latency: u64,
        unwrap_fee: u64,
    ) -> Result<GatewayConfig, (String, String)> {
        check_label(label).map_err(|e| ("label".to_string(), e))?;
        let token_t = self.token(token).map_err(|e| ("token".to_string(), e))?;
        let token_wt = self.token(wrapped).map_err(|e| ("wrapped".to_string(), e))?;
        let provider = self.account(provider).map_err(|e| ("provider".to_string(), e))?;
        let ledger = self.protocol.ledger();
        Ok(GatewayConfig {
            label: label.to_string(),
            origin_chain: ledger.token(token_t).map_err(|e| ("token".to_string(), e.to_string()))?.home_chain,
            dest_chain: ledger.token(token_wt).map_err(|e| ("wrapped".to_string(), e.to_string()))?.home_chain,
            token_t,
            token_wt,
            provider,
            latency_ticks: latency,
            unwrap_fee_flat_rgu: Amount(unwrap_fee),
        })
    }

    fn pool_config(
        &self,
        label: &str,
        token_w: &str,
        token_o: &str,
        fee_bps: u32,
        weight: u64,
    ) -> Result<PoolConfig, (String, String)> {
        check_label(label).map_err(|e| ("label".to_string(), e))?;
        let w = self.token(token_w).map_err(|e| ("token_w".to_string(), e))?;
        let o = self.token(token_o).map_err(|e| ("token_o".to_string(), e))?;
        let chain = self
            .protocol
            .ledger()
            .token(w)
            .map_err(|e| ("token_w".to_string(), e.to_string()))?
            .home_chain;
        Ok(PoolConfig { label: label.to_string(), chain, token_w: w, token_o: o, fee_bps, weight })
    }

    fn build(mut self) -> Result<Genesis, ValidationError> {
        let file = self.file;
        for (i, name) in file.chains.names.iter().enumerate() {
            let path = format!("chains.names[{i}]");
            if let Err(e) = check_label(name) {
                self.issues.push(path, e);
                continue;
            }
            let r = self.protocol.register_chain(name);
            self.issues.take(path, r);
        }

        for (i, t) in file.tokens.iter().enumerate() {
            let base = format!("tokens[{i}]");
            if let Err(e) = check_label(&t.symbol) {
                self.issues.push(format!("{base}.symbol"), e);
                continue;
            }
            let chain = match self.chain(&t.chain) {
                Ok(c) => c,
                Err(e) => {
                    self.issues.push(format!("{base}.chain"), e);
                    continue;
                }
            };
            let kind = match self.token_kind(t.kind, t.underlying.as_deref()) {
                Ok(k) => k,
                Err((key, e)) => {
                    self.issues.push(format!("{base}.{key}"), e);
                    continue;
                }
            };
            let r = self.protocol.register_token(chain, &t.symbol, kind);
            self.issues.take(base, r);
        }

        for (i, g) in file.gateways.iter().enumerate() {
            let base = format!("gateways[{i}]");
            match self.gateway_config(&g.label, &g.token, &g.wrapped, &g.provider, g.latency, g.unwrap_fee) {
                Ok(cfg) => {
                    let r = self.protocol.register_gateway(cfg);
                    self.issues.take(base, r);
                }
                Err((key, e)) => self.issues.push(format!("{base}.{key}"), e),
            }
        }

        for (i, p) in file.pools.iter().enumerate() {
            let base = format!("pools[{i}]");
            match self.pool_config(&p.label, &p.token_w, &p.token_o, p.fee_bps, p.weight) {
                Ok(cfg) => {
                    let r = self.protocol.create_pool(cfg);
                    self.issues.take(base, r);
                }
                Err((key, e)) => self.issues.push(format!("{base}.{key}"), e),
            }
        }
        if file.emission.e0 > 0 && file.pools.iter().all(|p| p.weight == 0) {
            self.issues.push("emission.e0", "positive emission needs a pool with positive weight");
        }

        self.balances();
        self.pool_genesis();
        self.feeds_section();
        let agents = self.agents();
        let schedule = self.schedule();
        let numeraire = self.numeraire();

        let mut feeds = Vec::new();
        let mut feed_pairs = Vec::new();
        for (i, f) in file.feeds.iter().enumerate() {
            let (label, base, quote) = f.header();
            if let (Ok(b), Ok(q), Ok(series)) = (self.token(base), self.token(quote), parse_series(f)) {
                let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.seed);
                rng.set_stream(FEED_STREAM_BASE + i as u64);
                feeds.push(Feed::new(label.to_string(), series, rng));
                feed_pairs.push((b, q));
            }
        }

        self.issues.finish()?;
        Ok(Genesis { protocol: self.protocol, agents, feeds, feed_pairs, schedule, numeraire })
    }

    fn balances(&mut self) {
        for (i, b) in self.file.balances.iter().enumerate() {
            let base = format!("balances[{i}]");
            let account = match self.account(&b.account) {
                Ok(a) => a,
                Err(e) => {
                    self.issues.push(format!("{base}.account"), e);
                    continue;
                }
            };
            let token = match self.token(&b.token) {
                Ok(t) => t,
                Err(e) => {
                    self.issues.push(format!("{base}.token"), e);
                    continue;
                }
            };
            if b.amount == 0 {
                self.issues.push(format!("{base}.amount"), "must be positive");
                continue;
            }
            let wrapped = matches!(
                self.protocol.ledger().token(token).map(|t| t.kind),
                Ok(TokenKind::Wrapped { .. })
            );
            let r = match (&b.via, wrapped) {
                (Some(via), true) => match self.gateway(via) {
                    Ok(g) if self.protocol.gateways().get(g).map(|g| g.token_wt) == Ok(token) => {
                        self.protocol.genesis_bridge(g, account, Amount(b.amount))
                    }
                    Ok(_) => {
                        self.issues.push(format!("{base}.via"), format!("gateway {via:?} does not issue {}", b.token));
                        continue;
                    }
                    Err(e) => {
                        self.issues.push(format!("{base}.via"), e);
                        continue;
                    }
                },
                (None, true) => {
                    self.issues.push(format!("{base}.via"), "required for wrapped tokens");
                    continue;
                }
                (Some(_), false) => {
                    self.issues.push(format!("{base}.via"), "allowed only for wrapped tokens");
                    continue;
                }
                (None, false) => self.protocol.genesis_allocate(token, account, Amount(b.amount)),
            };
            self.issues.take(base, r);
        }
    }

    fn pool_genesis(&mut self) {
        for (i, p) in self.file.pools.iter().enumerate() {
            let Some(g) = &p.genesis else { continue };
            let base = format!("pools[{i}].genesis");
            let Ok(pool) = self.pool(&p.label) else { continue };
            let account = match self.account(&g.account) {
                Ok(a) => a,
                Err(e) => {
                    self.issues.push(format!("{base}.account"), e);
                    continue;
                }
            };
            let r = self
                .protocol
                .add_initial_liquidity(pool, account, Amount(g.amount_w), Amount(g.amount_o));
            self.issues.take(base, r);
        }
    }

    fn feeds_section(&mut self) {
        for (i, f) in self.file.feeds.iter().enumerate() {
            let base = format!("feeds[{i}]");
            let (label, b, q) = f.header();
            if let Err(e) = check_label(label) {
                self.issues.push(format!("{base}.label"), e);
            } else if self.feeds.insert(label.to_string(), i).is_some() {
                self.issues.push(format!("{base}.label"), format!("duplicate feed {label:?}"));
            }
            if let Err(e) = self.token(b) {
                self.issues.push(format!("{base}.base"), e);
            }
            if let Err(e) = self.token(q) {
                self.issues.push(format!("{base}.quote"), e);
            }
            match f {
                FeedEntry::Constant { price, .. } => {
                    if let Err(e) = parse_price(price) {
                        self.issues.push(format!("{base}.price"), e);
                    }
                }
                FeedEntry::Piecewise { points, .. } => {
                    for (j, p) in points.iter().enumerate() {
                        if let Err(e) = parse_price(&p.price) {
                            self.issues.push(format!("{base}.points[{j}].price"), e);
                        }
                    }
                }
                FeedEntry::GeometricWalk { p0, .. } => {
                    if let Err(e) = parse_price(p0) {
                        self.issues.push(format!("{base}.p0"), e);
                    }
                }
            }
            // price parse failures are already reported per key
            if let Err(e) = parse_series(f).map(|s| s.validate()).unwrap_or(Ok(())) {
                self.issues.push(base, e);
            }
        }
    }

    fn agents(&mut self) -> Vec<AgentSpec> {
        let mut out = Vec::new();
        for (i, a) in self.file.agents.iter().enumerate() {
            let base = format!("agents[{i}]");
            match self.agent(a) {
                Ok((account_label, kind)) => match self.account(&account_label) {
                    Ok(account) => out.push(AgentSpec { id: i as u32, label: account_label, account, kind }),
                    Err(e) => self.issues.push(format!("{base}.account"), e),
                },
                Err((key, e)) => self.issues.push(format!("{base}.{key}"), e),
            }
        }
        out
    }

    fn agent(&self, a: &AgentEntry) -> Result<(String, AgentKind), (String, String)> {
        fn at(key: &'static str) -> impl Fn(String) -> (String, String) {
            move |e| (key.to_string(), e)
        }
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err((key.to_string(), "must be positive".to_string()))
            } else {
                Ok(Amount(v))
            }
        };
        match a {
            AgentEntry::Arbitrageur { account, pool, feed, min_profit } => {
                let pid = self.pool(pool).map_err(at("pool"))?;
                let fid = self.feed(feed).map_err(at("feed"))?;
                let p = self.protocol.amm().get(pid).map_err(|e| ("pool".to_string(), e.to_string()))?;
                let (_, b, q) = self.file.feeds[fid].header();
                if self.token(b).ok() != Some(p.token_w) || self.token(q).ok() != Some(p.token_o) {
                    return Err((
                        "feed".into(),
                        format!("feed {feed:?} must quote the pool's wrapped token in its counter token"),
                    ));
                }
                Ok((
                    account.clone(),
                    AgentKind::Arbitrageur { pool: pid, feed: fid, min_profit: Amount(*min_profit) },
                ))
            }
            AgentEntry::RandomTrader { account, pool, intensity, max_size } => {
                let pid = self.pool(pool).map_err(at("pool"))?;
                let rate = parse_rate(intensity).map_err(at("intensity"))?;
                let num = rate.numer().to_u64();
                let den = rate.denom().to_u64();
                let (Some(num), Some(den)) = (num, den) else {
                    return Err(("intensity".into(), "numerator and denominator must fit in 64 bits".into()));
                };
                Ok((
                    account.clone(),
                    AgentKind::RandomTrader {
                        pool: pid,
                        intensity: (num, den),
                        max_size: positive("max_size", *max_size)?,
                    },
                ))
            }
            AgentEntry::LiquidityProvider { account, pool, enter_tick, exit_tick, amount_w, amount_o, claim_every } => {
                let pid = self.pool(pool).map_err(at("pool"))?;
                if exit_tick.is_some_and(|x| x <= *enter_tick) {
                    return Err(("exit_tick".into(), "must be after enter_tick".into()));
                }
                if *claim_every == Some(0) {
                    return Err(("claim_every".into(), "must be at least 1".into()));
                }
                let amount_o = match amount_o {
                    Some(v) => Some(positive("amount_o", *v)?),
                    None => None,
                };
                Ok((
                    account.clone(),
                    AgentKind::LiquidityProvider {
                        pool: pid,
                        enter_tick: *enter_tick,
                        exit_tick: *exit_tick,
                        amount_w: positive("amount_w", *amount_w)?,
                        amount_o,
                        claim_every: *claim_every,
                    },
                ))
            }
            AgentEntry::Bridger { account, gateway, amount, policy } => {
                let gid = self.gateway(gateway).map_err(at("gateway"))?;
                Ok((
                    account.clone(),
                    AgentKind::Bridger { gateway: gid, amount: positive("amount", *amount)?, policy: *policy },
                ))
            }
        }
    }

    fn param_key(&self, key: &str, target: Option<&str>) -> Result<ParamKey, (String, String)> {
        let need_target = |what: &str| -> Result<&str, (String, String)> {
            target.ok_or_else(|| ("target".to_string(), format!("{key} needs a {what} label")))
        };
        let no_target = |k: ParamKey| -> Result<ParamKey, (String, String)> {
            match target {
                Some(_) => Err(("target".into(), format!("{key} takes no target"))),
                None => Ok(k),
            }
        };
        match key {
            "emission_e0" => no_target(ParamKey::EmissionE0),
            "emission_decay_num" => no_target(ParamKey::EmissionDecayNum),
            "emission_decay_den" => no_target(ParamKey::EmissionDecayDen),
            "emission_period_ticks" => no_target(ParamKey::EmissionPeriodTicks),
            "lp_fraction_bps" => no_target(ParamKey::LpFractionBps),
            "deposit_min" => no_target(ParamKey::DepositMin),
            "voting_period" => no_target(ParamKey::VotingPeriod),
            "quorum_bps" => no_target(ParamKey::QuorumBps),
            "threshold_bps" => no_target(ParamKey::ThresholdBps),
            "pool_weight" => {
                let p = self.pool(need_target("pool")?).map_err(|e| ("target".to_string(), e))?;
                Ok(ParamKey::PoolWeight(p))
            }
            "pool_fee_bps" => {
                let p = self.pool(need_target("pool")?).map_err(|e| ("target".to_string(), e))?;
                Ok(ParamKey::PoolFeeBps(p))
            }
            "gateway_unwrap_fee" => {
                let g = self.gateway(need_target("gateway")?).map_err(|e| ("target".to_string(), e))?;
                Ok(ParamKey::GatewayUnwrapFee(g))
            }
            other => Err(("key".into(), format!("unknown parameter {other:?}"))),
        }
    }

    fn payload(&mut self, p: &PayloadEntry) -> Result<ProposalKind, (String, String)> {
        match p {
            PayloadEntry::ParamChange { key, target, value } => Ok(ProposalKind::ParamChange {
                key: self.param_key(key, target.as_deref())?,
                value: *value,
            }),
            PayloadEntry::AddPool { label, token_w, token_o, fee_bps, weight } => {
                Ok(ProposalKind::AddPool(self.pool_config(label, token_w, token_o, *fee_bps, *weight)?))
            }
            PayloadEntry::AddToken { symbol, chain, token_kind, underlying } => {
                check_label(symbol).map_err(|e| ("symbol".to_string(), e))?;
                let chain = self.chain(chain).map_err(|e| ("chain".to_string(), e))?;
                let kind = self.token_kind(*token_kind, underlying.as_deref())?;
                Ok(ProposalKind::AddToken { chain, symbol: symbol.clone(), kind })
            }
            PayloadEntry::AddGateway { label, token, wrapped, provider, latency, unwrap_fee } => Ok(
                ProposalKind::AddGateway(self.gateway_config(label, token, wrapped, provider, *latency, *unwrap_fee)?),
            ),
            PayloadEntry::Text { text } => Ok(ProposalKind::Text(text.clone())),
        }
    }

    fn schedule(&mut self) -> Vec<ScheduledAction> {
        let mut out = Vec::new();
        // (tick, index) of every submit, for resolving votes
        let mut submits: Vec<(u64, usize)> = Vec::new();
        for (i, s) in self.file.schedule.iter().enumerate() {
            if let ScheduleEntry::Submit { tick, .. } = s {
                submits.push((*tick, i));
            }
        }
        for (i, s) in self.file.schedule.iter().enumerate() {
            let base = format!("schedule[{i}]");
            let resolved: Result<Action, (String, String)> = match s {
                ScheduleEntry::Submit { account, deposit, proposal, .. } => {
                    match (self.account(account), self.payload(proposal)) {
                        (Ok(account), Ok(kind)) => Ok(Action::Submit { account, deposit: Amount(*deposit), kind }),
                        (Err(e), _) => Err(("account".into(), e)),
                        (_, Err((key, e))) => Err((format!("proposal.{key}"), e)),
                    }
                }
                ScheduleEntry::Vote { tick, account, proposal, support } => {
                    let submitted_before = submits.get(*proposal as usize).is_some_and(|&(t, j)| t < *tick || (t == *tick && j < i));
                    if !submitted_before {
                        Err(("proposal".into(), format!("no proposal #{proposal} is submitted before this vote")))
                    } else {
                        self.account(account)
                            .map(|account| Action::Vote { account, proposal: *proposal, support: *support })
                            .map_err(|e| ("account".into(), e))
                    }
                }
                ScheduleEntry::ClaimLp { account, pool, .. } => match (self.account(account), self.pool(pool)) {
                    (Ok(account), Ok(pool)) => Ok(Action::ClaimLp { account, pool }),
                    (Err(e), _) => Err(("account".into(), e)),
                    (_, Err(e)) => Err(("pool".into(), e)),
                },
                ScheduleEntry::ClaimGateway { gateway, .. } => self
                    .gateway(gateway)
                    .map(|gateway| Action::ClaimGateway { gateway })
                    .map_err(|e| ("gateway".into(), e)),
            };
            match resolved {
                Ok(action) => out.push(ScheduledAction { tick: s.tick(), index: i, action }),
                Err((key, e)) => self.issues.push(format!("{base}.{key}"), e),
            }
        }
        out.sort_by_key(|a| (a.tick, a.index));
        out
    }

    fn numeraire(&mut self) -> Option<TokenId> {
        match &self.file.run.numeraire {
            Some(r) => match self.token(r) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.issues.push("run.numeraire", e);
                    None
                }
            },
            None => self.file.feeds.first().and_then(|f| self.token(f.header().2).ok()),
        }
    }
}
