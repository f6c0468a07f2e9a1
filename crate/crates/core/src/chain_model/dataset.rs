use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::amount::Wei;
use super::hex::{AccountAddress, HashId};
use super::rows::{AddressRow, Block, Contract, Token, TokenTransaction, Transaction, Withdrawal};

/// Balances valid at the end of block `as_of_block`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BalanceSnapshot {
    pub as_of_block: u64,
    pub balances: BTreeMap<AccountAddress, Wei>,
}

impl BalanceSnapshot {
    pub fn get(&self, a: &AccountAddress) -> Wei {
        self.balances.get(a).copied().unwrap_or(Wei::ZERO)
    }
}

/// The seven tables plus the balance snapshot taken at the last block.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChainDataset {
    pub blocks: Vec<Block>,
    pub addresses: Vec<AddressRow>,
    pub transactions: Vec<Transaction>,
    pub contracts: Vec<Contract>,
    pub tokens: Vec<Token>,
    pub token_transactions: Vec<TokenTransaction>,
    pub withdrawals: Vec<Withdrawal>,
    pub final_balances: BalanceSnapshot,
}

impl ChainDataset {
    pub fn block_range(&self) -> Option<(u64, u64)> {
        let lo = self.blocks.iter().map(|b| b.number).min()?;
        let hi = self.blocks.iter().map(|b| b.number).max()?;
        Some((lo, hi))
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
            && self.addresses.is_empty()
            && self.transactions.is_empty()
            && self.contracts.is_empty()
            && self.tokens.is_empty()
            && self.token_transactions.is_empty()
            && self.withdrawals.is_empty()
    }

    pub fn row_counts(&self) -> BTreeMap<&'static str, usize> {
        BTreeMap::from([
            ("blocks", self.blocks.len()),
            ("addresses", self.addresses.len()),
            ("transactions", self.transactions.len()),
            ("contracts", self.contracts.len()),
            ("tokens", self.tokens.len()),
            ("token_transactions", self.token_transactions.len()),
            ("withdrawals", self.withdrawals.len()),
        ])
    }

    /// Sorts every table into its canonical order: blocks by number,
    /// transactions and withdrawals by (block number, index), everything else
    /// by primary key.
    pub fn canonicalize(&mut self) {
        let number: BTreeMap<_, _> = self.blocks.iter().map(|b| (b.hash, b.number)).collect();
        let block_no = |h: &HashId| number.get(h).copied().unwrap_or(u64::MAX);
        self.blocks.sort_by_key(|b| (b.number, b.hash));
        self.addresses.sort_by_key(|a| a.address);
        self.transactions
            .sort_by_key(|t| (block_no(&t.block_hash), t.transaction_index, t.hash));
        self.contracts.sort_by_key(|c| c.key());
        self.tokens.sort_by_key(|t| t.address);
        self.token_transactions.sort_by_key(|t| t.key());
        self.withdrawals
            .sort_by_key(|w| (block_no(&w.hash), w.withdrawal_index));
    }
}

/// A contiguous block-number window naming one database state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub lo: u64,
    pub hi: u64,
    pub label: String,
}

impl SliceSpec {
    pub fn new(lo: u64, hi: u64, label: impl Into<String>) -> Result<Self, String> {
        if lo > hi {
            return Err(format!("slice lower bound {lo} exceeds upper bound {hi}"));
        }
        Ok(SliceSpec {
            lo,
            hi,
            label: label.into(),
        })
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: u64) -> bool {
        (self.lo..=self.hi).contains(&n)
    }
}
