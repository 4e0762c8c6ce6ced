//! Multi-chain token ledger.
//!
//! The ledger is the only place balances and supplies live. Every token has
//! exactly one home chain, so balances are keyed by `(token, account)` and
//! the chain argument of each operation is checked against the token's home.
//! Minting and burning are crate-private: only the gateway, reward, and
//! governance paths of [`crate::Protocol`] can change supply.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChainId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccountId(pub u32);

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain#{}", self.0)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token#{}", self.0)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "account#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Origin,
    Wrapped { underlying: TokenId, origin_chain: ChainId },
    Rgu,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenInfo {
    pub id: TokenId,
    pub symbol: String,
    pub home_chain: ChainId,
    pub kind: TokenKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("name must be nonempty")]
    EmptyName,
    #[error("chain name {0:?} already registered")]
    DuplicateChainName(String),
    #[error("unknown {0}")]
    UnknownChain(ChainId),
    #[error("unknown {0}")]
    UnknownToken(TokenId),
    #[error("unknown {0}")]
    UnknownAccount(AccountId),
    #[error("{token} does not live on {chain}")]
    WrongChain { chain: ChainId, token: TokenId },
    #[error("symbol {symbol:?} already registered on {chain}")]
    DuplicateSymbolOnChain { chain: ChainId, symbol: String },
    #[error("an RGU token is already registered")]
    SecondRguToken,
    #[error("wrapped token must reference an origin token on its origin chain: {0}")]
    BadUnderlying(String),
    #[error("insufficient balance: {account} holds {available} of {token}, needs {required}")]
    InsufficientBalance {
        token: TokenId,
        account: AccountId,
        available: Amount,
        required: Amount,
    },
    #[error("arithmetic overflow")]
    Overflow,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    chains: Vec<String>,
    tokens: Vec<TokenInfo>,
    accounts: Vec<String>,
    account_index: BTreeMap<String, AccountId>,
    balances: BTreeMap<(TokenId, AccountId), Amount>,
    supply: Vec<Amount>,
    rgu: Option<TokenId>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_chain(&mut self, name: &str) -> Result<ChainId, LedgerError> {
        if name.is_empty() {
            return Err(LedgerError::EmptyName);
        }
        if self.chains.iter().any(|c| c == name) {
            return Err(LedgerError::DuplicateChainName(name.to_string()));
        }
        let id = ChainId(self.chains.len() as u32);
        self.chains.push(name.to_string());
        Ok(id)
    }

    /// Validate a prospective token registration without mutating anything.
    pub fn check_token(&self, chain: ChainId, symbol: &str, kind: TokenKind) -> Result<(), LedgerError> {
        self.chain_name(chain)?;
        if symbol.is_empty() {
            return Err(LedgerError::EmptyName);
        }
        if self.tokens.iter().any(|t| t.home_chain == chain && t.symbol == symbol) {
            return Err(LedgerError::DuplicateSymbolOnChain {
                chain,
                symbol: symbol.to_string(),
            });
        }
        match kind {
            TokenKind::Rgu if self.rgu.is_some() => Err(LedgerError::SecondRguToken),
            TokenKind::Wrapped {
                underlying,
                origin_chain,
            } => {
                let under = self
                    .tokens
                    .get(underlying.0 as usize)
                    .ok_or_else(|| LedgerError::BadUnderlying(format!("{underlying} not registered")))?;
                if under.kind != TokenKind::Origin {
                    return Err(LedgerError::BadUnderlying(format!(
                        "{underlying} is not an origin token"
                    )));
                }
                if under.home_chain != origin_chain {
                    return Err(LedgerError::BadUnderlying(format!(
                        "{underlying} lives on {}, not {origin_chain}",
                        under.home_chain
                    )));
                }
                if origin_chain == chain {
                    return Err(LedgerError::BadUnderlying(
                        "wrapped token must live on a different chain than its underlying".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn register_token(
        &mut self,
        chain: ChainId,
        symbol: &str,
        kind: TokenKind,
    ) -> Result<TokenId, LedgerError> {
        self.check_token(chain, symbol, kind)?;
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(TokenInfo {
            id,
            symbol: symbol.to_string(),
            home_chain: chain,
            kind,
        });
        self.supply.push(Amount::ZERO);
        if kind == TokenKind::Rgu {
            self.rgu = Some(id);
        }
        Ok(id)
    }

    /// Get or create the account with this label.
    pub fn account(&mut self, label: &str) -> AccountId {
        if let Some(id) = self.account_index.get(label) {
            return *id;
        }
        let id = AccountId(self.accounts.len() as u32);
        self.accounts.push(label.to_string());
        self.account_index.insert(label.to_string(), id);
        id
    }

    pub fn find_account(&self, label: &str) -> Option<AccountId> {
        self.account_index.get(label).copied()
    }

    pub fn account_label(&self, id: AccountId) -> Result<&str, LedgerError> {
        self.accounts
            .get(id.0 as usize)
            .map(String::as_str)
            .ok_or(LedgerError::UnknownAccount(id))
    }

    pub fn chain_name(&self, id: ChainId) -> Result<&str, LedgerError> {
        self.chains
            .get(id.0 as usize)
            .map(String::as_str)
            .ok_or(LedgerError::UnknownChain(id))
    }

    pub fn find_chain(&self, name: &str) -> Option<ChainId> {
        self.chains.iter().position(|c| c == name).map(|i| ChainId(i as u32))
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn token(&self, id: TokenId) -> Result<&TokenInfo, LedgerError> {
        self.tokens.get(id.0 as usize).ok_or(LedgerError::UnknownToken(id))
    }

    pub fn tokens(&self) -> &[TokenInfo] {
        &self.tokens
    }

    pub fn find_token(&self, chain: ChainId, symbol: &str) -> Option<TokenId> {
        self.tokens
            .iter()
            .find(|t| t.home_chain == chain && t.symbol == symbol)
            .map(|t| t.id)
    }

    pub fn rgu(&self) -> Option<TokenId> {
        self.rgu
    }

    fn check(&self, chain: ChainId, token: TokenId) -> Result<(), LedgerError> {
        self.chain_name(chain)?;
        let info = self.token(token)?;
        if info.home_chain != chain {
            return Err(LedgerError::WrongChain { chain, token });
        }
        Ok(())
    }

    fn check_account(&self, account: AccountId) -> Result<(), LedgerError> {
        self.account_label(account).map(|_| ())
    }

    pub fn balance_of(
        &self,
        chain: ChainId,
        token: TokenId,
        account: AccountId,
    ) -> Result<Amount, LedgerError> {
        self.check(chain, token)?;
        self.check_account(account)?;
        Ok(self.balance(token, account))
    }

    pub fn total_supply(&self, chain: ChainId, token: TokenId) -> Result<Amount, LedgerError> {
        self.check(chain, token)?;
        Ok(self.supply[token.0 as usize])
    }

    /// Balance lookup for a token already known to exist.
    pub(crate) fn balance(&self, token: TokenId, account: AccountId) -> Amount {
        self.balances.get(&(token, account)).copied().unwrap_or_default()
    }

    pub(crate) fn supply_of(&self, token: TokenId) -> Amount {
        self.supply.get(token.0 as usize).copied().unwrap_or_default()
    }

    fn set_balance(&mut self, token: TokenId, account: AccountId, value: Amount) {
        if value.is_zero() {
            self.balances.remove(&(token, account));
        } else {
            self.balances.insert((token, account), value);
        }
    }

    fn require(&self, token: TokenId, account: AccountId, amount: Amount) -> Result<Amount, LedgerError> {
        let available = self.balance(token, account);
        available.checked_sub(amount).ok_or(LedgerError::InsufficientBalance {
            token,
            account,
            available,
            required: amount,
        })
    }

    pub(crate) fn mint(
        &mut self,
        chain: ChainId,
        token: TokenId,
        account: AccountId,
        amount: Amount,
    ) -> Result<(), LedgerError> {
        self.check(chain, token)?;
        self.check_account(account)?;
        let supply = self.supply[token.0 as usize]
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        let balance = self
            .balance(token, account)
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        self.supply[token.0 as usize] = supply;
        self.set_balance(token, account, balance);
        Ok(())
    }

    pub(crate) fn burn(
        &mut self,
        chain: ChainId,
        token: TokenId,
        account: AccountId,
        amount: Amount,
    ) -> Result<(), LedgerError> {
        self.check(chain, token)?;
        self.check_account(account)?;
        let balance = self.require(token, account, amount)?;
        // supply >= balance >= amount holds by the sum invariant
        self.supply[token.0 as usize] = Amount(self.supply[token.0 as usize].0 - amount.0);
        self.set_balance(token, account, balance);
        Ok(())
    }

    pub(crate) fn transfer(
        &mut self,
        chain: ChainId,
        token: TokenId,
        from: AccountId,
        to: AccountId,
        amount: Amount,
    ) -> Result<(), LedgerError> {
        self.check(chain, token)?;
        self.check_account(from)?;
        self.check_account(to)?;
        let from_after = self.require(token, from, amount)?;
        if from == to || amount.is_zero() {
            return Ok(());
        }
        let to_after = self
            .balance(token, to)
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        self.set_balance(token, from, from_after);
        self.set_balance(token, to, to_after);
        Ok(())
    }

    /// Every `(token, account)` pair with a nonzero balance.
    pub fn holders(&self, token: TokenId) -> impl Iterator<Item = (AccountId, Amount)> + '_ {
        self.balances
            .range((token, AccountId(0))..=(token, AccountId(u32::MAX)))
            .map(|((_, a), v)| (*a, *v))
    }

    /// Checks that each token's balances sum to its recorded supply.
    pub fn check_supply_sums(&self) -> Result<(), String> {
        let mut sums = vec![0u128; self.tokens.len()];
        for ((token, _), v) in &self.balances {
            sums[token.0 as usize] += v.as_u128();
        }
        for (i, sum) in sums.iter().enumerate() {
            if *sum != self.supply[i].as_u128() {
                return Err(format!(
                    "{} ({}): balances sum to {} but supply is {}",
                    TokenId(i as u32),
                    self.tokens[i].symbol,
                    sum,
                    self.supply[i]
                ));
            }
        }
        Ok(())
    }
}
