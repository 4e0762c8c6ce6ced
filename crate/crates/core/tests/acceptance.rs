//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances are pinned below.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{corpus, load, world, World, WorldConfig};
use graviton_core::gateway::TransferKind;
use graviton_core::sim::{Format, Scenario, Simulation};
use graviton_core::{
    Amount, GovEvent, GovParams, ParamKey, Price, Protocol, ProposalKind, ProposalStatus, BPS, UNIT,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const BRIDGE_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const MIN_SCENARIOS: usize = 6;
const MIN_TICKS: u64 = 10_000;
const MIN_SWAPS: usize = 10_000;
const ROUND_TRIPS: u64 = 1_000;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn step(sim: &mut Simulation, name: &str) -> Result<(), String> {
    sim.step().map_err(|e| format!("{name}: {e}"))
}

// ---- 1 -----------------------------------------------------------------

fn check_bridge_tick(p: &Protocol) -> Result<(), String> {
    let mut by_token: BTreeMap<_, (u128, u128)> = BTreeMap::new();
    for (id, g) in p.gateways().iter() {
        let (escrow, issued) = (g.escrow().as_u128(), g.issued().as_u128());
        let (mints, unlocks) = (g.pending_mints().as_u128(), g.pending_unlocks().as_u128());
        ensure(escrow == issued + mints + unlocks, || {
            format!("{id:?}: escrow {escrow} != issued {issued} + mints {mints} + unlocks {unlocks}")
        })?;
        let held = p.ledger().balance_of(g.origin_chain, g.token_t, g.escrow_account).unwrap().as_u128();
        ensure(held == escrow, || format!("{id:?}: escrow account holds {held}, books say {escrow}"))?;
        let e = by_token.entry((g.dest_chain, g.token_wt)).or_default();
        e.0 += escrow;
        e.1 += mints + unlocks;
    }
    for ((chain, token), (escrow, pending)) in by_token {
        let supply = p.ledger().total_supply(chain, token).unwrap().as_u128();
        ensure(escrow == supply + pending, || {
            format!("{token:?}: escrow {escrow} != supply {supply} + pending {pending}")
        })?;
    }
    Ok(())
}

fn bridge_conservation() -> Outcome {
    let scenarios = corpus();
    ensure(scenarios.len() >= MIN_SCENARIOS, || format!("only {} scenarios", scenarios.len()))?;
    let start = Instant::now();
    let (mut ticks, mut checks) = (0u64, 0u64);
    for (name, text) in &scenarios {
        let scenario = Scenario::from_toml_str(text).map_err(|e| format!("{name}: {e}"))?;
        let mut sim = Simulation::new(&scenario).map_err(|e| format!("{name}: {e}"))?;
        check_bridge_tick(sim.protocol()).map_err(|e| format!("{name} genesis: {e}"))?;
        while !sim.is_finished() {
            let t = sim.tick();
            step(&mut sim, name)?;
            check_bridge_tick(sim.protocol()).map_err(|e| format!("{name} tick {t}: {e}"))?;
            ticks += 1;
            checks += sim.protocol().gateways().len() as u64;
        }
    }
    let elapsed = start.elapsed();
    ensure(ticks >= MIN_TICKS, || format!("only {ticks} ticks"))?;
    ensure(elapsed < BRIDGE_BUDGET, || format!("took {elapsed:?}, budget {BRIDGE_BUDGET:?}"))?;
    Ok(format!("{} scenarios, {ticks} ticks, {checks} gateway checks, {elapsed:.2?}", scenarios.len()))
}

// ---- 2 -----------------------------------------------------------------

fn product(p: &Protocol, w: &World) -> u128 {
    let (x, y) = p.amm().get(w.pool).unwrap().reserves();
    x.as_u128() * y.as_u128()
}

fn constant_product() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut swaps, mut strict) = (0usize, 0usize);
    while swaps < MIN_SWAPS {
        let fee = match rng.gen_range(0..4) {
            0 => 0,
            1 => 30,
            2 => 100,
            _ => rng.gen_range(0..1_000),
        };
        let mut w = world(WorldConfig { fee_bps: fee, ..WorldConfig::default() });
        let x = rng.gen_range(1..=1_000_000 * UNIT);
        let y = rng.gen_range(1..=1_000_000 * UNIT);
        let lp = w.fund("lp", x, y);
        let trader = w.fund("trader", 1 << 62, 1 << 62);
        w.p.add_initial_liquidity(w.pool, lp, Amount(x), Amount(y)).unwrap();
        for _ in 0..50 {
            let token = if rng.gen::<bool>() { w.wt } else { w.bnb };
            let amount = Amount(rng.gen_range(1..=x.max(y)));
            let before = product(&w.p, &w);
            w.p.swap_exact_in(w.pool, trader, token, amount, Amount::ZERO)
                .map_err(|e| format!("swap failed: {e}"))?;
            let after = product(&w.p, &w);
            ensure(after >= before, || format!("k fell from {before} to {after} at fee {fee}"))?;
            if fee > 0 {
                ensure(after > before, || format!("k not strictly increasing at fee {fee}"))?;
                strict += 1;
            }
            swaps += 1;
        }
    }
    Ok(format!("{swaps} swaps, {strict} with fee > 0 strictly increasing"))
}

// ---- 3 -----------------------------------------------------------------

fn rational_oracle(x: u64, y: u64, fee: u32, dx: u64) -> u64 {
    let r = |n: u64| BigRational::from_integer(BigInt::from(n));
    let keep = BigRational::new(BigInt::from(BPS - u64::from(fee)), BigInt::from(BPS));
    let effective = (r(dx) * keep).floor();
    let remaining = (r(x) * r(y) / (r(x) + effective)).ceil();
    let out = r(y) - remaining;
    u64::try_from(out.to_integer()).unwrap()
}

fn swap_oracle() -> Outcome {
    let start = Instant::now();
    let mut cases = 0u64;
    for fee in [0u32, 30, 100] {
        for x in 1..=50u64 {
            for y in 1..=50u64 {
                let mut w = world(WorldConfig { fee_bps: fee, ..WorldConfig::default() });
                let lp = w.fund("lp", x * UNIT, y * UNIT);
                let trader = w.fund("trader", 50 * UNIT, 0);
                w.p.add_initial_liquidity(w.pool, lp, Amount(x * UNIT), Amount(y * UNIT)).unwrap();
                for d in 1..=50u64 {
                    let mut p = w.p.clone();
                    let out = p
                        .swap_exact_in(w.pool, trader, w.wt, Amount(d * UNIT), Amount::ZERO)
                        .map_err(|e| format!("x={x} y={y} d={d} fee={fee}: {e}"))?;
                    let expected = rational_oracle(x * UNIT, y * UNIT, fee, d * UNIT);
                    ensure(out.0 == expected, || {
                        format!("x={x} y={y} d={d} fee={fee}: engine {} oracle {expected}", out.0)
                    })?;
                    cases += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}, budget {ORACLE_BUDGET:?}"))?;
    Ok(format!("{cases} cases exact, {elapsed:.2?}"))
}

// ---- 4 -----------------------------------------------------------------

/// Emission per tick from the schedule parameters, by repeated decay.
struct EmissionOracle {
    e0: u128,
    num: u128,
    den: u128,
    period: u64,
}

impl EmissionOracle {
    fn at(&self, tick: u64) -> u128 {
        let mut e = self.e0;
        for _ in 0..tick / self.period {
            if e == 0 || self.num == self.den {
                break;
            }
            e = e * self.num / self.den;
        }
        e
    }

    fn apply(&mut self, key: ParamKey, value: u64) {
        match key {
            ParamKey::EmissionE0 => self.e0 = u128::from(value),
            ParamKey::EmissionDecayNum => self.num = u128::from(value),
            ParamKey::EmissionDecayDen => self.den = u128::from(value),
            ParamKey::EmissionPeriodTicks => self.period = value,
            _ => {}
        }
    }
}

fn pending_total(p: &Protocol) -> u128 {
    let mut total = 0u128;
    for (pool, state) in p.amm().iter() {
        let mut accounts: Vec<_> = state.shareholders().map(|(a, _)| a).collect();
        if let Some(r) = p.rewards().pool_state(pool) {
            accounts.extend(r.accounts());
        }
        accounts.sort();
        accounts.dedup();
        for a in accounts {
            total += p.pending_lp(pool, a).unwrap().as_u128();
        }
    }
    for (g, _) in p.gateways().iter() {
        total += p.pending_gateway(g).unwrap().as_u128();
    }
    total
}

fn hand_example() -> Result<(), String> {
    let mut w = world(WorldConfig { e0: 10 * UNIT, ..WorldConfig::default() });
    let lp = w.fund("lp", 1_000 * UNIT, 1_000 * UNIT);
    w.p.add_initial_liquidity(w.pool, lp, Amount(1_000 * UNIT), Amount(1_000 * UNIT)).unwrap();
    for t in 0..5 {
        w.p.accrue(t).unwrap();
    }
    let lp_owed = w.p.pending_lp(w.pool, lp).unwrap();
    let gw_owed = w.p.pending_gateway(w.gw).unwrap();
    ensure(lp_owed == Amount(40 * UNIT) && gw_owed == Amount(10 * UNIT), || {
        format!("hand example: LP {lp_owed}, gateway {gw_owed}")
    })?;
    let claimed = w.p.claim_lp(w.pool, lp).unwrap();
    ensure(claimed == Amount(40 * UNIT), || format!("hand example claim {claimed}"))
}

fn reward_conservation() -> Outcome {
    let mut checked = 0u64;
    for (name, text) in corpus() {
        let scenario = Scenario::from_toml_str(&text).map_err(|e| format!("{name}: {e}"))?;
        let f = &scenario.file().emission;
        let mut oracle = EmissionOracle {
            e0: u128::from(f.e0),
            num: u128::from(f.decay_num),
            den: u128::from(f.decay_den),
            period: f.period_ticks,
        };
        let mut sim = Simulation::new(&scenario).map_err(|e| format!("{name}: {e}"))?;
        let (mut emitted, mut seen_events) = (0u128, 0usize);
        while !sim.is_finished() {
            let t = sim.tick();
            emitted += oracle.at(t);
            step(&mut sim, &name)?;
            let p = sim.protocol();
            let events = &sim.governance_events()[seen_events..];
            for (_, ev) in events {
                if let GovEvent::Applied(id) = ev {
                    if let ProposalKind::ParamChange { key, value } = p.governance().get(*id).unwrap().kind {
                        oracle.apply(key, value);
                    }
                }
            }
            seen_events = sim.governance_events().len();
            let c = p.rewards().conservation(p.amm()).map_err(|e| format!("{name}: {e}"))?;
            let residual = c.residual().ok_or_else(|| format!("{name} tick {t}: fractional residual"))?;
            let claimed = p.rewards().claimed();
            let pending = pending_total(p);
            ensure(claimed + pending + residual == emitted, || {
                format!("{name} tick {t}: claimed {claimed} + pending {pending} + residual {residual} != emitted {emitted}")
            })?;
            checked += 1;
        }
    }
    hand_example()?;
    Ok(format!("{checked} tick checks against the emission oracle; hand example exact"))
}

// ---- 5 -----------------------------------------------------------------

fn anti_farming() -> Outcome {
    let with = load("anti_farming");
    let churner = with.file().agents.len() - 1;
    let without = with
        .edit(|f| {
            f.agents.remove(churner);
        })
        .map_err(|e| e.to_string())?;
    let mut a = Simulation::new(&with).map_err(|e| e.to_string())?;
    let mut b = Simulation::new(&without).map_err(|e| e.to_string())?;
    let gateways: Vec<_> = a.protocol().gateways().iter().map(|(id, _)| id).collect();
    let pool = a.protocol().amm().iter().next().map(|(id, _)| id).unwrap();
    let mut round_trips = 0u64;
    while !a.is_finished() {
        let t = a.tick();
        step(&mut a, "with churn")?;
        step(&mut b, "without churn")?;
        let g = a.protocol().gateways().get(gateways[0]).unwrap();
        round_trips +=
            g.pending().filter(|p| p.kind == TransferKind::Unlock && p.mature_at == t + g.latency_ticks).count() as u64;
        let (pa, pb) = (a.protocol(), b.protocol());
        ensure(pa.amm().get(pool).unwrap().reserves() == pb.amm().get(pool).unwrap().reserves(), || {
            format!("tick {t}: pool reserves diverged")
        })?;
        for g in &gateways {
            let (ga, gb) = (pa.gateways().get(*g).unwrap(), pb.gateways().get(*g).unwrap());
            ensure(ga.outstanding() == gb.outstanding(), || format!("tick {t}: {g:?} outstanding diverged"))?;
            let acc_a = pa.pending_gateway(*g).unwrap().0 + pa.rewards().claimed_gateway(*g).0;
            let acc_b = pb.pending_gateway(*g).unwrap().0 + pb.rewards().claimed_gateway(*g).0;
            ensure(acc_a == acc_b, || format!("tick {t}: {g:?} accrued {acc_a} with churn, {acc_b} without"))?;
        }
    }
    ensure(round_trips >= ROUND_TRIPS, || format!("only {round_trips} round trips"))?;
    let fee = a.protocol().gateways().get(gateways[0]).unwrap().unwrap_fee_flat_rgu;
    let burned = a.protocol().gateways().fees_burned();
    ensure(burned.0 == round_trips * fee.0, || format!("fee burns {burned} for {round_trips} round trips"))?;
    let accrued: Vec<String> = gateways
        .iter()
        .map(|g| {
            let p = a.protocol();
            (p.pending_gateway(*g).unwrap().0 + p.rewards().claimed_gateway(*g).0).to_string()
        })
        .collect();
    Ok(format!("{round_trips} round trips, gateway accruals identical every tick ({})", accrued.join(", ")))
}

// ---- 6 -----------------------------------------------------------------

fn slippage_law() -> Outcome {
    let trade = Amount(10 * UNIT);
    let mut cases = 0;
    for (x, y) in [(1_000 * UNIT, 2_000 * UNIT), (3, 5), (50 * UNIT, 50 * UNIT), (7_777, 1_000_000 * UNIT)] {
        let mut last: Option<Price> = None;
        for c in [1u64, 2, 4, 8] {
            let mut w = world(WorldConfig::default());
            let lp = w.fund("lp", c * x, c * y);
            w.p.add_initial_liquidity(w.pool, lp, Amount(c * x), Amount(c * y)).unwrap();
            let s = w.p.amm().quote_slippage(w.pool, trade).unwrap();
            if let Some(prev) = &last {
                ensure(&s < prev, || format!("x={x} y={y} c={c}: slippage {s} not below {prev}"))?;
            }
            last = Some(s);
            cases += 1;
        }
    }
    Ok(format!("{cases} quotes, strictly decreasing in every scaling series"))
}

// ---- 7 -----------------------------------------------------------------

fn initial_rgu(scenario: &Scenario) -> u128 {
    let rgu: Vec<String> = scenario
        .file()
        .tokens
        .iter()
        .filter(|t| format!("{:?}", t.kind).to_lowercase() == "rgu")
        .map(|t| format!("{}@{}", t.symbol, t.chain))
        .collect();
    scenario
        .file()
        .balances
        .iter()
        .filter(|b| rgu.contains(&b.token))
        .map(|b| u128::from(b.amount))
        .sum()
}

fn rgu_supply_identity() -> Outcome {
    let scenario = load("governance_lifecycle");
    let initial = initial_rgu(&scenario);
    let mut sim = Simulation::new(&scenario).map_err(|e| e.to_string())?;
    let mut fee_burns = 0u128;
    while !sim.is_finished() {
        let t = sim.tick();
        let fees: Vec<(u64, u64)> = sim
            .protocol()
            .gateways()
            .iter()
            .map(|(_, g)| (g.unwrap_fee_flat_rgu.0, g.latency_ticks))
            .collect();
        step(&mut sim, "governance_lifecycle")?;
        for ((_, g), (fee, latency)) in sim.protocol().gateways().iter().zip(&fees) {
            let started = g.pending().filter(|p| p.kind == TransferKind::Unlock && p.mature_at == t + latency).count();
            fee_burns += started as u128 * u128::from(*fee);
        }
    }
    let p = sim.protocol();
    let claimed = p.rewards().claimed();
    let failed: Vec<_> = p.governance().proposals().iter().filter(|pr| pr.status == ProposalStatus::Failed).collect();
    ensure(failed.len() == 1, || format!("{} failed proposals, expected 1", failed.len()))?;
    let deposit_burns: u128 = failed.iter().map(|pr| pr.deposit.as_u128()).sum();
    ensure(fee_burns > 0 && claimed > 0, || "scenario lacks fee burns or claims".into())?;
    let supply = p.rgu_supply().as_u128();
    let expected = initial + claimed - fee_burns - deposit_burns;
    ensure(supply == expected, || {
        format!("supply {supply} != initial {initial} + claimed {claimed} - fees {fee_burns} - deposits {deposit_burns}")
    })?;

    let deflation = load("deflation");
    let start = initial_rgu(&deflation);
    let out = graviton_core::sim::run(&deflation).map_err(|e| e.to_string())?;
    let s = &out.summary;
    let burns = s.fees_burned.as_u128() + s.deposits_burned.as_u128();
    ensure(burns >= s.claimed, || format!("deflation burns {burns} < claims {}", s.claimed))?;
    ensure(s.rgu_supply.as_u128() < start, || format!("deflation supply {} not below {start}", s.rgu_supply))?;
    Ok(format!(
        "supply {supply} exact ({fee_burns} fee + {deposit_burns} deposit burns, {claimed} claimed); \
         deflation: burns {burns} >= claims {}, supply {start} -> {}",
        s.claimed, s.rgu_supply
    ))
}

// ---- 8 -----------------------------------------------------------------

fn arbitrage_closure() -> Outcome {
    let mut sim = Simulation::new(&load("arb_piecewise_fee0")).map_err(|e| e.to_string())?;
    let pool = sim.protocol().amm().iter().next().map(|(id, _)| id).unwrap();
    let mut exact = 0;
    while !sim.is_finished() {
        let t = sim.tick();
        step(&mut sim, "arb_piecewise_fee0")?;
        let spot = sim.protocol().amm().spot_price(pool).map_err(|e| e.to_string())?;
        let feed = sim.feed_price(0, t);
        ensure(spot == feed, || format!("fee 0 tick {t}: spot {spot} != feed {feed}"))?;
        exact += 1;
    }

    let mut sim = Simulation::new(&load("arb_piecewise_fee30")).map_err(|e| e.to_string())?;
    let pool = sim.protocol().amm().iter().next().map(|(id, _)| id).unwrap();
    let phi = BigRational::new(BigInt::from(sim.protocol().amm().get(pool).unwrap().fee_bps), BigInt::from(BPS));
    let mut worst = BigRational::zero();
    let mut banded = 0;
    while !sim.is_finished() {
        let t = sim.tick();
        step(&mut sim, "arb_piecewise_fee30")?;
        let spot = sim.protocol().amm().spot_price(pool).map_err(|e| e.to_string())?;
        let feed = sim.feed_price(0, t);
        let gap = (&spot - &feed).abs() / std::cmp::max(spot.clone(), feed.clone());
        ensure(gap <= phi, || format!("fee 30 tick {t}: relative gap {gap} exceeds {phi}"))?;
        if gap > worst {
            worst = gap;
        }
        banded += 1;
    }
    Ok(format!("fee 0: {exact} ticks exact; fee 30: {banded} ticks in band, worst gap {worst}"))
}

// ---- 9 -----------------------------------------------------------------

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_sha256.txt")
}

fn determinism() -> Outcome {
    let mut digests = BTreeMap::new();
    for (name, text) in corpus() {
        let scenario = Scenario::from_toml_str(&text).map_err(|e| format!("{name}: {e}"))?;
        let first = graviton_core::sim::run(&scenario).map_err(|e| format!("{name}: {e}"))?;
        let second = graviton_core::sim::run(&scenario).map_err(|e| format!("{name}: {e}"))?;
        for (format, ext) in [(Format::Csv, "csv"), (Format::Records, "jsonl")] {
            let (a, b) = (first.metrics.to_bytes(format), second.metrics.to_bytes(format));
            ensure(a == b, || format!("{name}.{ext}: runs differ"))?;
            digests.insert(format!("{name}_seed{}.{ext}", scenario.seed), hex::encode(Sha256::digest(&a)));
        }
    }
    let rendered: String = digests.iter().map(|(k, v)| format!("{v}  {k}\n")).collect();
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, &rendered).map_err(|e| e.to_string())?;
        return Ok(format!("{} outputs byte-identical; golden hashes rewritten", digests.len()));
    }
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let golden = golden.replace("\r\n", "\n");
    for (want, got) in golden.lines().zip(rendered.lines()) {
        ensure(want == got, || format!("golden mismatch: expected `{want}`, got `{got}`"))?;
    }
    ensure(golden.lines().count() == rendered.lines().count(), || "golden file lists other outputs".into())?;
    Ok(format!("{} outputs byte-identical across runs and equal to the golden hashes", digests.len()))
}

// ---- 10 ----------------------------------------------------------------

fn gov_world(e0: u64) -> World {
    world(WorldConfig {
        e0,
        gov: GovParams { deposit_min: Amount(10), voting_period: 10, quorum_bps: 4_000, threshold_bps: 5_000 },
        ..WorldConfig::default()
    })
}

fn tally_example(yes: u64, no: u64, deposit: u64) -> Result<(ProposalStatus, Amount, Amount), String> {
    let mut w = gov_world(0);
    let proposer = w.fund_rgu("proposer", yes + deposit);
    let against = w.fund_rgu("against", no.max(1));
    w.fund_rgu("idle", 1_000 - yes - deposit - no.max(1));
    let id = w.p.submit(proposer, ProposalKind::Text("example".into()), Amount(deposit), 0).map_err(|e| e.to_string())?;
    if yes > 0 {
        w.p.vote(id, proposer, true, 1).map_err(|e| e.to_string())?;
    }
    if no > 0 {
        w.p.vote(id, against, false, 1).map_err(|e| e.to_string())?;
    }
    let status = w.p.finalize(id, 10).map_err(|e| e.to_string())?;
    w.p.audit().map_err(|e| e.to_string())?;
    Ok((status, w.balance(w.rgu, proposer), w.p.rgu_supply()))
}

fn governance_lifecycle() -> Outcome {
    let passed = tally_example(300, 100, 50)?;
    ensure(passed == (ProposalStatus::Passed, Amount(350), Amount(1_000)), || {
        format!("300 yes / 100 no: {passed:?}")
    })?;
    let failed = tally_example(100, 100, 50)?;
    ensure(failed == (ProposalStatus::Failed, Amount(100), Amount(950)), || {
        format!("100 yes / 100 no: {failed:?}")
    })?;
    let empty = tally_example(0, 0, 50)?;
    ensure(empty == (ProposalStatus::Failed, Amount(0), Amount(950)), || format!("no votes: {empty:?}"))?;

    // emission doubles; accrual at the application tick still uses the old rate
    let mut w = gov_world(10);
    let lp = w.fund("lp", 1_000, 1_000);
    w.p.add_initial_liquidity(w.pool, lp, Amount(1_000), Amount(1_000)).unwrap();
    let voter = w.fund_rgu("voter", 1_000);
    let id = w
        .p
        .submit(voter, ProposalKind::ParamChange { key: ParamKey::EmissionE0, value: 20 }, Amount(10), 0)
        .map_err(|e| e.to_string())?;
    w.p.vote(id, voter, true, 0).map_err(|e| e.to_string())?;
    let mut applied_at = None;
    let mut per_tick = Vec::new();
    for now in 0..14 {
        let before = w.p.rewards().emitted();
        w.p.accrue(now).map_err(|e| e.to_string())?;
        per_tick.push(w.p.rewards().emitted() - before);
        for ev in w.p.governance_phase(now).map_err(|e| e.to_string())? {
            if ev == GovEvent::Applied(id) {
                applied_at = Some(now);
            }
        }
    }
    let at = applied_at.ok_or("parameter change never applied")? as usize;
    ensure(per_tick[at] == 10 && per_tick[at + 1] == 20, || {
        format!("accrual around application tick {at}: {} then {}", per_tick[at], per_tick[at + 1])
    })?;
    ensure(per_tick[..=at].iter().all(|e| *e == 10) && per_tick[at + 1..].iter().all(|e| *e == 20), || {
        format!("accrual sequence {per_tick:?}")
    })?;
    Ok(format!("pass/refund, fail/burn and empty-vote examples exact; change applied at tick {at}, rate 10 -> 20 from tick {}", at + 1))
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("bridge escrow identity", bridge_conservation),
        ("constant-product monotonicity", constant_product),
        ("swap oracle equivalence", swap_oracle),
        ("reward conservation", reward_conservation),
        ("anti-farming neutrality", anti_farming),
        ("slippage decreases with liquidity", slippage_law),
        ("RGU supply identity", rgu_supply_identity),
        ("arbitrage closure", arbitrage_closure),
        ("determinism", determinism),
        ("governance lifecycle", governance_lifecycle),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", checks.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
