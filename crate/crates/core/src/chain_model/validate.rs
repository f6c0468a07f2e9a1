//! Key and foreign-key checks over a [`ChainDataset`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::dataset::ChainDataset;
use super::hex::{AccountAddress, HashId};
use super::rows::MAX_TRANSACTION_TYPE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Dangling,
    Duplicate,
    OutOfRange,
    NonceGap,
    TimestampOrder,
    SnapshotTag,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Dangling => "dangling",
            ViolationKind::Duplicate => "duplicate",
            ViolationKind::OutOfRange => "out of range",
            ViolationKind::NonceGap => "nonce gap",
            ViolationKind::TimestampOrder => "timestamp order",
            ViolationKind::SnapshotTag => "snapshot tag",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub table: &'static str,
    /// Column or key the rule applies to.
    pub key: &'static str,
    pub kind: ViolationKind,
    /// Identifier of the offending row.
    pub row: String,
}

impl Violation {
    pub fn rule(&self) -> String {
        format!("{}.{} {}", self.table, self.key, self.kind)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (row {})", self.rule(), self.row)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, table: &'static str, key: &'static str, kind: ViolationKind, row: impl fmt::Display) {
        self.violations.push(Violation {
            table,
            key,
            kind,
            row: row.to_string(),
        });
    }
}

pub fn validate_dataset(ds: &ChainDataset) -> ValidationReport {
    let mut r = ValidationReport::default();

    let mut addresses: HashSet<AccountAddress> = HashSet::new();
    for a in &ds.addresses {
        if !addresses.insert(a.address) {
            r.push("addresses", "address", ViolationKind::Duplicate, a.address);
        }
    }

    let mut blocks: HashMap<HashId, u64> = HashMap::new();
    let mut numbers: HashSet<u64> = HashSet::new();
    for b in &ds.blocks {
        if blocks.insert(b.hash, b.number).is_some() {
            r.push("blocks", "hash", ViolationKind::Duplicate, b.hash);
        }
        if !numbers.insert(b.number) {
            r.push("blocks", "number", ViolationKind::Duplicate, b.number);
        }
        if !addresses.contains(&b.miner) {
            r.push("blocks", "miner", ViolationKind::Dangling, b.hash);
        }
    }
    let mut by_number: Vec<_> = ds.blocks.iter().map(|b| (b.number, b.timestamp)).collect();
    by_number.sort_unstable();
    for w in by_number.windows(2) {
        if w[1].1 < w[0].1 {
            r.push("blocks", "timestamp", ViolationKind::TimestampOrder, w[1].0);
        }
    }

    let mut tx_hashes: HashSet<HashId> = HashSet::new();
    let mut tx_slots: HashSet<(HashId, u64)> = HashSet::new();
    let mut by_sender: BTreeMap<AccountAddress, Vec<(u64, u64, u64, HashId)>> = BTreeMap::new();
    for t in &ds.transactions {
        if !tx_hashes.insert(t.hash) {
            r.push("transactions", "hash", ViolationKind::Duplicate, t.hash);
        }
        if !tx_slots.insert((t.block_hash, t.transaction_index)) {
            r.push("transactions", "transaction_index", ViolationKind::Duplicate, t.hash);
        }
        if t.transaction_type > MAX_TRANSACTION_TYPE {
            r.push("transactions", "transaction_type", ViolationKind::OutOfRange, t.hash);
        }
        match blocks.get(&t.block_hash) {
            Some(&n) => by_sender
                .entry(t.from_address)
                .or_default()
                .push((n, t.transaction_index, t.nonce, t.hash)),
            None => r.push("transactions", "block_hash", ViolationKind::Dangling, t.hash),
        }
        if !addresses.contains(&t.from_address) {
            r.push("transactions", "from_address", ViolationKind::Dangling, t.hash);
        }
        if let Some(to) = t.to_address {
            if !addresses.contains(&to) {
                r.push("transactions", "to_address", ViolationKind::Dangling, t.hash);
            }
        }
    }
    for txs in by_sender.values_mut() {
        txs.sort_unstable();
        for w in txs.windows(2) {
            if w[1].2 != w[0].2.wrapping_add(1) {
                r.push("transactions", "nonce", ViolationKind::NonceGap, w[1].3);
            }
        }
    }

    let mut contract_keys = HashSet::new();
    for c in &ds.contracts {
        if !contract_keys.insert(c.key()) {
            r.push("contracts", "address", ViolationKind::Duplicate, format!("{}/{}", c.address, c.version));
        }
        if !addresses.contains(&c.address) {
            r.push("contracts", "address", ViolationKind::Dangling, format!("{}/{}", c.address, c.version));
        }
        if let Some(h) = c.block_hash {
            if !blocks.contains_key(&h) {
                r.push("contracts", "block_hash", ViolationKind::Dangling, format!("{}/{}", c.address, c.version));
            }
        }
    }

    let mut tokens = HashSet::new();
    for t in &ds.tokens {
        if !tokens.insert(t.address) {
            r.push("tokens", "address", ViolationKind::Duplicate, t.address);
        }
        if !addresses.contains(&t.address) {
            r.push("tokens", "address", ViolationKind::Dangling, t.address);
        }
        if let Some(h) = t.block_hash {
            if !blocks.contains_key(&h) {
                r.push("tokens", "block_hash", ViolationKind::Dangling, t.address);
            }
        }
    }

    let mut tt_keys = HashSet::new();
    for t in &ds.token_transactions {
        let id = format!("{}/{}", t.transaction_hash, t.log_index);
        if !tt_keys.insert(t.key()) {
            r.push("token_transactions", "log_index", ViolationKind::Duplicate, &id);
        }
        if !tx_hashes.contains(&t.transaction_hash) {
            r.push("token_transactions", "transaction_hash", ViolationKind::Dangling, &id);
        }
        if !tokens.contains(&t.token_address) {
            r.push("token_transactions", "token_address", ViolationKind::Dangling, &id);
        }
    }

    let mut w_keys = HashSet::new();
    for w in &ds.withdrawals {
        let id = format!("{}/{}", w.hash, w.withdrawal_index);
        if !w_keys.insert(w.key()) {
            r.push("withdrawals", "withdrawal_index", ViolationKind::Duplicate, &id);
        }
        if !blocks.contains_key(&w.hash) {
            r.push("withdrawals", "hash", ViolationKind::Dangling, &id);
        }
        if !addresses.contains(&w.address) {
            r.push("withdrawals", "address", ViolationKind::Dangling, &id);
        }
    }

    if let Some((_, hi)) = ds.block_range() {
        if ds.final_balances.as_of_block != hi {
            r.push("balances", "as_of_block", ViolationKind::SnapshotTag, ds.final_balances.as_of_block);
        }
    }

    r
}
