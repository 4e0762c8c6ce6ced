//! Deterministic engine for a wrapped-token liquidity-incentive protocol.
//!
//! Tokens locked at a gateway on their origin chain are issued as wrapped
//! tokens on a destination chain, traded in constant-product pools against
//! a local origin token, and their liquidity is rewarded in a single
//! reward/governance/utility token (RGU). RGU is burned as the unwrap fee and
//! when governance proposals fail.
//!
//! [`Protocol`] composes the modules and audits their invariants;
//! [`sim`] drives agent-based scenarios against it tick by tick.

pub mod amm;
pub mod amount;
pub mod gateway;
pub mod governance;
pub mod ledger;
pub mod protocol;
pub mod rewards;
pub mod sim;

pub use amm::{Amm, AmmError, Pool, PoolConfig, PoolId};
pub use amount::{Amount, Price, Tick, BPS, UNIT};
pub use gateway::{Gateway, GatewayConfig, GatewayError, GatewayId, Gateways};
pub use governance::{GovError, GovParams, ParamKey, ProposalId, ProposalKind, ProposalStatus};
pub use ledger::{AccountId, ChainId, Ledger, LedgerError, TokenId, TokenKind};
pub use protocol::{GovEvent, InvariantViolation, Protocol, ProtocolConfig, ProtocolError};
pub use rewards::{EmissionSchedule, RewardConfig, RewardError, Rewards, PRECISION};
