//! Deterministic tick-driven scenario engine.
//!
//! A run is a pure function of the scenario text and the seed: agents act in
//! id order, each agent and each random feed draws from its own ChaCha8
//! stream keyed by `(seed, stream id)`, and every container iterates in key
//! order.

pub mod agents;
pub mod arb;
pub mod engine;
pub mod feeds;
pub mod metrics;
pub mod scenario;

pub use agents::{Agent, AgentKind, AgentSpec, BridgePolicy};
pub use arb::{optimal_arb_input, within_fee_band, ArbDirection};
pub use engine::{run, RunOutput, RunSummary, SimError, Simulation};
pub use feeds::{Feed, Series};
pub use metrics::{Format, MetricsTable};
pub use scenario::{Scenario, ValidationError};
