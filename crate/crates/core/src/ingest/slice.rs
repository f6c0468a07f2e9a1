//! Referentially closed block-range slices of a raw export.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::ledger::{BalanceLedger, LedgerWarning};
use crate::chain_model::{AddressRow, BalanceSnapshot, ChainDataset, HashId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SliceError {
    #[error("slice bounds inverted: lo {lo} > hi {hi}")]
    Inverted { lo: u64, hi: u64 },
    #[error("slice empty: no blocks in [{lo}, {hi}]")]
    Empty { lo: u64, hi: u64 },
}

#[derive(Debug, Clone)]
pub struct SliceOutput {
    pub dataset: ChainDataset,
    pub warnings: Vec<LedgerWarning>,
}

/// Extracts blocks `lo..=hi` and everything they reference.
///
/// Token and contract rows whose creating block lies outside the slice keep
/// their row with a null `block_hash`. Contract versions created after `hi`
/// are dropped. Balances are those in effect after block `hi`.
pub fn extract_slice(raw: &ChainDataset, lo: u64, hi: u64) -> Result<SliceOutput, SliceError> {
    if lo > hi {
        return Err(SliceError::Inverted { lo, hi });
    }
    let number_of: HashMap<HashId, u64> = raw.blocks.iter().map(|b| (b.hash, b.number)).collect();
    let in_slice = |h: &HashId| number_of.get(h).is_some_and(|n| (lo..=hi).contains(n));
    let mut out = ChainDataset {
        blocks: raw.blocks.iter().filter(|b| (lo..=hi).contains(&b.number)).cloned().collect(),
        ..ChainDataset::default()
    };
    if out.blocks.is_empty() {
        return Err(SliceError::Empty { lo, hi });
    }
    out.transactions = raw.transactions.iter().filter(|t| in_slice(&t.block_hash)).cloned().collect();
    out.withdrawals = raw.withdrawals.iter().filter(|w| in_slice(&w.hash)).cloned().collect();
    let tx_hashes: HashSet<HashId> = out.transactions.iter().map(|t| t.hash).collect();
    out.token_transactions = raw
        .token_transactions
        .iter()
        .filter(|t| tx_hashes.contains(&t.transaction_hash))
        .cloned()
        .collect();

    let touched_tokens: HashSet<_> = out.token_transactions.iter().map(|t| t.token_address).collect();
    out.tokens = raw
        .tokens
        .iter()
        .filter(|t| touched_tokens.contains(&t.address) || t.block_hash.as_ref().is_some_and(in_slice))
        .cloned()
        .map(|mut t| {
            if !t.block_hash.as_ref().is_some_and(in_slice) {
                t.block_hash = None;
            }
            t
        })
        .collect();

    let touched: HashSet<_> = out
        .transactions
        .iter()
        .flat_map(|t| std::iter::once(t.from_address).chain(t.to_address))
        .collect();
    let created_by_hi = |h: &Option<HashId>| match h {
        None => true,
        Some(h) => number_of.get(h).is_none_or(|n| *n <= hi),
    };
    out.contracts = raw
        .contracts
        .iter()
        .filter(|c| {
            (touched.contains(&c.address) && created_by_hi(&c.block_hash)) || c.block_hash.as_ref().is_some_and(in_slice)
        })
        .cloned()
        .map(|mut c| {
            if !c.block_hash.as_ref().is_some_and(in_slice) {
                c.block_hash = None;
            }
            c
        })
        .collect();

    let mut addrs = BTreeSet::new();
    addrs.extend(out.blocks.iter().map(|b| b.miner));
    addrs.extend(touched.iter().copied());
    addrs.extend(out.withdrawals.iter().map(|w| w.address));
    addrs.extend(out.contracts.iter().map(|c| c.address));
    addrs.extend(out.tokens.iter().map(|t| t.address));

    let ledger = BalanceLedger::build(raw);
    let as_of = out.blocks.iter().map(|b| b.number).max().expect("non-empty");
    let mut warnings = Vec::new();
    let mut snapshot = BalanceSnapshot {
        as_of_block: as_of,
        ..BalanceSnapshot::default()
    };
    for a in addrs {
        let (bal, warn) = ledger.balance_after(&a, as_of);
        warnings.extend(warn);
        out.addresses.push(AddressRow {
            address: a,
            eth_balance: bal,
        });
        snapshot.balances.insert(a, bal);
    }
    out.final_balances = snapshot;
    out.canonicalize();
    Ok(SliceOutput { dataset: out, warnings })
}
