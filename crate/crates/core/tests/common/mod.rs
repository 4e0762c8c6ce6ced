#![allow(dead_code)]

use std::path::PathBuf;

use graviton_core::{
    AccountId, Amount, ChainId, EmissionSchedule, GatewayConfig, GatewayId, GovParams, PoolConfig, PoolId, Protocol,
    ProtocolConfig, RewardConfig, TokenId, TokenKind,
};

/// Two chains, one gateway bridging `T` to `wT`, and one `wT/BNB` pool.
pub struct World {
    pub p: Protocol,
    pub eth: ChainId,
    pub bsc: ChainId,
    pub t: TokenId,
    pub wt: TokenId,
    pub bnb: TokenId,
    pub rgu: TokenId,
    pub gw: GatewayId,
    pub pool: PoolId,
    pub provider: AccountId,
}

pub struct WorldConfig {
    pub e0: u64,
    pub lp_fraction_bps: u32,
    pub fee_bps: u32,
    pub weight: u64,
    pub latency: u64,
    pub unwrap_fee: u64,
    pub multi_gateway: bool,
    pub gov: GovParams,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            e0: 0,
            lp_fraction_bps: 8_000,
            fee_bps: 30,
            weight: 100,
            latency: 0,
            unwrap_fee: 0,
            multi_gateway: false,
            gov: GovParams { deposit_min: Amount(0), voting_period: 10, quorum_bps: 4_000, threshold_bps: 5_000 },
        }
    }
}

pub fn world(cfg: WorldConfig) -> World {
    let mut p = Protocol::new(ProtocolConfig {
        multi_gateway: cfg.multi_gateway,
        emission: EmissionSchedule::constant(Amount(cfg.e0)),
        rewards: RewardConfig { lp_fraction_bps: cfg.lp_fraction_bps },
        governance: cfg.gov,
    })
    .unwrap();
    let eth = p.register_chain("eth").unwrap();
    let bsc = p.register_chain("bsc").unwrap();
    let t = p.register_token(eth, "T", TokenKind::Origin).unwrap();
    let wt = p
        .register_token(bsc, "wT", TokenKind::Wrapped { underlying: t, origin_chain: eth })
        .unwrap();
    let bnb = p.register_token(bsc, "BNB", TokenKind::Origin).unwrap();
    let rgu = p.register_token(eth, "RGU", TokenKind::Rgu).unwrap();
    let provider = p.account("provider");
    let gw = p
        .register_gateway(GatewayConfig {
            label: "gw".into(),
            origin_chain: eth,
            dest_chain: bsc,
            token_t: t,
            token_wt: wt,
            provider,
            latency_ticks: cfg.latency,
            unwrap_fee_flat_rgu: Amount(cfg.unwrap_fee),
        })
        .unwrap();
    let pool = p
        .create_pool(PoolConfig {
            label: "wt_bnb".into(),
            chain: bsc,
            token_w: wt,
            token_o: bnb,
            fee_bps: cfg.fee_bps,
            weight: cfg.weight,
        })
        .unwrap();
    World { p, eth, bsc, t, wt, bnb, rgu, gw, pool, provider }
}

impl World {
    /// Give `label` wrapped tokens (backed through the gateway) and BNB.
    pub fn fund(&mut self, label: &str, wt: u64, bnb: u64) -> AccountId {
        let a = self.p.account(label);
        if wt > 0 {
            self.p.genesis_bridge(self.gw, a, Amount(wt)).unwrap();
        }
        if bnb > 0 {
            self.p.genesis_allocate(self.bnb, a, Amount(bnb)).unwrap();
        }
        a
    }

    pub fn fund_rgu(&mut self, label: &str, amount: u64) -> AccountId {
        let a = self.p.account(label);
        self.p.genesis_allocate(self.rgu, a, Amount(amount)).unwrap();
        a
    }

    pub fn balance(&self, token: TokenId, account: AccountId) -> Amount {
        let chain = self.p.ledger().token(token).unwrap().home_chain;
        self.p.ledger().balance_of(chain, token, account).unwrap()
    }
}

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Every corpus scenario as `(file stem, text)`, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn load(name: &str) -> graviton_core::sim::Scenario {
    let text = std::fs::read_to_string(scenarios_dir().join(format!("{name}.toml"))).unwrap();
    graviton_core::sim::Scenario::from_toml_str(&text).unwrap()
}
