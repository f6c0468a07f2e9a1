//! Initial-load and batch generation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ops::{Batch, BatchKind, Mutation};
use crate::chain_model::{
    AccountAddress, AddressRow, Block, ChainDataset, Contract, HashId, Row, RowKey, Token, TokenTransaction,
    Transaction, Withdrawal,
};
use crate::ingest::{extract_slice, BalanceLedger, LedgerWarning, SliceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub init_blocks: u64,
    /// Blocks per batch.
    pub granularity: u64,
    pub expire: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("init_blocks must be at least 1")]
    ZeroInit,
    #[error("granularity must be at least 1")]
    ZeroGranularity,
    #[error("init_blocks {init} exceeds the {total} blocks in the dataset")]
    InitTooLarge { init: u64, total: u64 },
    #[error("no batches: all {total} blocks fall in the initial range")]
    NoBatches { total: u64 },
    #[error("with expiration, granularity {granularity} must not exceed init_blocks {init}")]
    WindowTooSmall { granularity: u64, init: u64 },
    #[error(transparent)]
    Slice(#[from] SliceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub index: usize,
    pub block_range: (u64, u64),
    pub first_timestamp: u64,
    /// Fewer blocks than the configured granularity.
    pub short: bool,
    pub upsert_file: String,
    pub expire_file: Option<String>,
    pub expire_range: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadManifest {
    pub dialect: String,
    pub initial_range: (u64, u64),
    pub initial_timestamp: u64,
    pub load_file: String,
    pub granularity: u64,
    pub expire: bool,
    pub batch_count: usize,
    pub batches: Vec<BatchEntry>,
}

/// An upsert batch and, with expiration enabled, the expire batch applied
/// immediately before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPair {
    pub expire: Option<Batch>,
    pub upsert: Batch,
}

impl BatchPair {
    /// Batches in application order.
    pub fn in_order(&self) -> impl Iterator<Item = &Batch> {
        self.expire.iter().chain(std::iter::once(&self.upsert))
    }
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub load: Batch,
    pub batches: Vec<BatchPair>,
    pub manifest: WorkloadManifest,
    pub warnings: Vec<LedgerWarning>,
}

fn sorted_blocks(ds: &ChainDataset) -> Vec<&Block> {
    let mut v: Vec<&Block> = ds.blocks.iter().collect();
    v.sort_by_key(|b| b.number);
    v
}

fn check(ds: &ChainDataset, cfg: &WorkloadConfig) -> Result<u64, WorkloadError> {
    if cfg.init_blocks == 0 {
        return Err(WorkloadError::ZeroInit);
    }
    if cfg.granularity == 0 {
        return Err(WorkloadError::ZeroGranularity);
    }
    let total = ds.blocks.len() as u64;
    if cfg.init_blocks > total {
        return Err(WorkloadError::InitTooLarge {
            init: cfg.init_blocks,
            total,
        });
    }
    Ok(total)
}

fn load_ops(slice: &ChainDataset) -> Vec<Mutation> {
    let mut ops = Vec::new();
    ops.extend(slice.addresses.iter().cloned().map(|r| Mutation::Insert(Row::Addresses(r))));
    ops.extend(slice.blocks.iter().cloned().map(|r| Mutation::Insert(Row::Blocks(r))));
    ops.extend(slice.tokens.iter().cloned().map(|r| Mutation::Insert(Row::Tokens(r))));
    ops.extend(slice.contracts.iter().cloned().map(|r| Mutation::Insert(Row::Contracts(r))));
    ops.extend(slice.withdrawals.iter().cloned().map(|r| Mutation::Insert(Row::Withdrawals(r))));
    ops.extend(slice.transactions.iter().cloned().map(|r| Mutation::Insert(Row::Transactions(r))));
    ops.extend(
        slice
            .token_transactions
            .iter()
            .cloned()
            .map(|r| Mutation::Insert(Row::TokenTransactions(r))),
    );
    ops
}

/// The load batch: the closed slice over the first `init_blocks` blocks with
/// balances as of the slice's last block.
pub fn gen_initial(ds: &ChainDataset, cfg: &WorkloadConfig) -> Result<(Batch, Vec<LedgerWarning>), WorkloadError> {
    check(ds, cfg)?;
    let blocks = sorted_blocks(ds);
    let lo = blocks[0].number;
    let hi = blocks[cfg.init_blocks as usize - 1].number;
    let out = extract_slice(ds, lo, hi)?;
    let batch = Batch {
        kind: BatchKind::Load,
        index: 0,
        block_range: (lo, hi),
        ops: load_ops(&out.dataset),
    };
    Ok((batch, out.warnings))
}

/// Per-block lookups built once over the whole dataset.
struct Index<'a> {
    number_of: HashMap<HashId, u64>,
    tx_by_block: HashMap<HashId, Vec<&'a Transaction>>,
    wd_by_block: HashMap<HashId, Vec<&'a Withdrawal>>,
    tktx_by_tx: HashMap<HashId, Vec<&'a TokenTransaction>>,
    tokens_by_addr: HashMap<AccountAddress, &'a Token>,
    tokens_created: HashMap<HashId, Vec<&'a Token>>,
    contracts_by_addr: HashMap<AccountAddress, Vec<&'a Contract>>,
    contracts_created: HashMap<HashId, Vec<&'a Contract>>,
}

impl<'a> Index<'a> {
    fn build(ds: &'a ChainDataset) -> Self {
        let mut ix = Index {
            number_of: ds.blocks.iter().map(|b| (b.hash, b.number)).collect(),
            tx_by_block: HashMap::new(),
            wd_by_block: HashMap::new(),
            tktx_by_tx: HashMap::new(),
            tokens_by_addr: ds.tokens.iter().map(|t| (t.address, t)).collect(),
            tokens_created: HashMap::new(),
            contracts_by_addr: HashMap::new(),
            contracts_created: HashMap::new(),
        };
        let mut txs: Vec<&Transaction> = ds.transactions.iter().collect();
        txs.sort_by_key(|t| (ix.number_of.get(&t.block_hash).copied(), t.transaction_index, t.hash));
        for t in txs {
            ix.tx_by_block.entry(t.block_hash).or_default().push(t);
        }
        let mut wds: Vec<&Withdrawal> = ds.withdrawals.iter().collect();
        wds.sort_by_key(|w| (w.withdrawal_index, w.hash));
        for w in wds {
            ix.wd_by_block.entry(w.hash).or_default().push(w);
        }
        let mut tk: Vec<&TokenTransaction> = ds.token_transactions.iter().collect();
        tk.sort_by_key(|t| t.key());
        for t in tk {
            ix.tktx_by_tx.entry(t.transaction_hash).or_default().push(t);
        }
        for t in &ds.tokens {
            if let Some(h) = t.block_hash {
                ix.tokens_created.entry(h).or_default().push(t);
            }
        }
        let mut cs: Vec<&Contract> = ds.contracts.iter().collect();
        cs.sort_by_key(|c| c.key());
        for c in cs {
            ix.contracts_by_addr.entry(c.address).or_default().push(c);
            if let Some(h) = c.block_hash {
                ix.contracts_created.entry(h).or_default().push(c);
            }
        }
        ix
    }
}

/// Rows already present in the store, tracked across batches.
#[derive(Default)]
struct Seen {
    addresses: HashSet<AccountAddress>,
    tokens: HashMap<AccountAddress, Option<HashId>>,
    contracts: HashMap<(AccountAddress, u64), Option<HashId>>,
}

impl Seen {
    fn from_ops(ops: &[Mutation]) -> Self {
        let mut s = Seen::default();
        for m in ops {
            if let Mutation::Insert(r) = m {
                s.record(r);
            }
        }
        s
    }

    fn record(&mut self, r: &Row) {
        match r {
            Row::Addresses(a) => {
                self.addresses.insert(a.address);
            }
            Row::Tokens(t) => {
                self.tokens.insert(t.address, t.block_hash);
            }
            Row::Contracts(c) => {
                self.contracts.insert(c.key(), c.block_hash);
            }
            _ => {}
        }
    }
}

fn upsert_batch(
    index: usize,
    blocks: &[&Block],
    ix: &Index<'_>,
    ledger: &BalanceLedger,
    seen: &mut Seen,
    warnings: &mut Vec<LedgerWarning>,
) -> Batch {
    let lo = blocks[0].number;
    let hi = blocks[blocks.len() - 1].number;
    let hashes: HashSet<HashId> = blocks.iter().map(|b| b.hash).collect();
    let created_here = |h: &Option<HashId>| h.is_some_and(|h| hashes.contains(&h));
    let created_by_hi = |h: &Option<HashId>| match h {
        None => true,
        Some(h) => ix.number_of.get(h).is_none_or(|n| *n <= hi),
    };

    let txs: Vec<&Transaction> = blocks
        .iter()
        .flat_map(|b| ix.tx_by_block.get(&b.hash).into_iter().flatten().copied())
        .collect();
    let wds: Vec<&Withdrawal> = blocks
        .iter()
        .flat_map(|b| ix.wd_by_block.get(&b.hash).into_iter().flatten().copied())
        .collect();
    let tktxs: Vec<&TokenTransaction> = txs
        .iter()
        .flat_map(|t| ix.tktx_by_tx.get(&t.hash).into_iter().flatten().copied())
        .collect();

    let mut token_addrs: BTreeSet<AccountAddress> = tktxs.iter().map(|t| t.token_address).collect();
    for b in blocks {
        token_addrs.extend(ix.tokens_created.get(&b.hash).into_iter().flatten().map(|t| t.address));
    }
    let new_tokens: Vec<Token> = token_addrs
        .into_iter()
        .filter(|a| !seen.tokens.contains_key(a))
        .filter_map(|a| ix.tokens_by_addr.get(&a).copied())
        .cloned()
        .map(|mut t| {
            if !created_here(&t.block_hash) {
                t.block_hash = None;
            }
            t
        })
        .collect();

    let touched: BTreeSet<AccountAddress> = txs
        .iter()
        .flat_map(|t| std::iter::once(t.from_address).chain(t.to_address))
        .collect();
    let mut contract_rows: BTreeMap<(AccountAddress, u64), &Contract> = BTreeMap::new();
    for a in &touched {
        for c in ix.contracts_by_addr.get(a).into_iter().flatten() {
            if created_by_hi(&c.block_hash) {
                contract_rows.insert(c.key(), c);
            }
        }
    }
    for b in blocks {
        for c in ix.contracts_created.get(&b.hash).into_iter().flatten() {
            contract_rows.insert(c.key(), c);
        }
    }
    let new_contracts: Vec<Contract> = contract_rows
        .into_iter()
        .filter(|(k, _)| !seen.contracts.contains_key(k))
        .map(|(_, c)| {
            let mut c = c.clone();
            if !created_here(&c.block_hash) {
                c.block_hash = None;
            }
            c
        })
        .collect();

    let mut addrs: BTreeSet<AccountAddress> = BTreeSet::new();
    addrs.extend(blocks.iter().map(|b| b.miner));
    addrs.extend(touched.iter().copied());
    addrs.extend(wds.iter().map(|w| w.address));
    addrs.extend(new_tokens.iter().map(|t| t.address));
    addrs.extend(new_contracts.iter().map(|c| c.address));

    let mut ops = Vec::new();
    for a in addrs.iter().filter(|a| !seen.addresses.contains(a)) {
        let (bal, warn) = ledger.balance_before(a, lo);
        warnings.extend(warn);
        ops.push(Mutation::Insert(Row::Addresses(AddressRow {
            address: *a,
            eth_balance: bal,
        })));
    }
    ops.extend(blocks.iter().map(|b| Mutation::Insert(Row::Blocks((*b).clone()))));
    ops.extend(new_tokens.into_iter().map(|t| Mutation::Insert(Row::Tokens(t))));
    ops.extend(new_contracts.into_iter().map(|c| Mutation::Insert(Row::Contracts(c))));
    ops.extend(wds.iter().map(|w| Mutation::Insert(Row::Withdrawals((*w).clone()))));
    ops.extend(txs.iter().map(|t| Mutation::Insert(Row::Transactions((*t).clone()))));
    ops.extend(tktxs.iter().map(|t| Mutation::Insert(Row::TokenTransactions((*t).clone()))));

    let mut balance_touched: BTreeSet<AccountAddress> = BTreeSet::new();
    balance_touched.extend(touched.iter().copied());
    balance_touched.extend(wds.iter().map(|w| w.address));
    for a in balance_touched {
        let delta = ledger.delta_between(&a, lo, hi);
        if !delta.is_zero() {
            ops.push(Mutation::UpdateBalance { address: a, delta });
        }
    }

    for m in &ops {
        if let Mutation::Insert(r) = m {
            seen.record(r);
        }
    }
    Batch {
        kind: BatchKind::Upsert,
        index,
        block_range: (lo, hi),
        ops,
    }
}

fn expire_batch(index: usize, blocks: &[&Block], ix: &Index<'_>, seen: &mut Seen) -> Batch {
    let lo = blocks[0].number;
    let hi = blocks[blocks.len() - 1].number;
    let txs: Vec<&Transaction> = blocks
        .iter()
        .flat_map(|b| ix.tx_by_block.get(&b.hash).into_iter().flatten().copied())
        .collect();
    let mut ops = Vec::new();
    for t in &txs {
        for tk in ix.tktx_by_tx.get(&t.hash).into_iter().flatten() {
            ops.push(Mutation::Delete(RowKey::TokenTransactions {
                transaction_hash: tk.transaction_hash,
                log_index: tk.log_index,
            }));
        }
    }
    ops.extend(txs.iter().map(|t| Mutation::Delete(RowKey::Transactions { hash: t.hash })));
    for b in blocks {
        for w in ix.wd_by_block.get(&b.hash).into_iter().flatten() {
            ops.push(Mutation::Delete(RowKey::Withdrawals {
                hash: w.hash,
                withdrawal_index: w.withdrawal_index,
            }));
        }
    }
    let hashes: HashSet<HashId> = blocks.iter().map(|b| b.hash).collect();
    let mut tokens: Vec<AccountAddress> = seen
        .tokens
        .iter()
        .filter(|(_, h)| h.is_some_and(|h| hashes.contains(&h)))
        .map(|(a, _)| *a)
        .collect();
    tokens.sort();
    for a in tokens {
        seen.tokens.insert(a, None);
        ops.push(Mutation::NullBlockHash(RowKey::Tokens { address: a }));
    }
    let mut contracts: Vec<(AccountAddress, u64)> = seen
        .contracts
        .iter()
        .filter(|(_, h)| h.is_some_and(|h| hashes.contains(&h)))
        .map(|(k, _)| *k)
        .collect();
    contracts.sort();
    for (address, version) in contracts {
        seen.contracts.insert((address, version), None);
        ops.push(Mutation::NullBlockHash(RowKey::Contracts { address, version }));
    }
    ops.extend(blocks.iter().map(|b| Mutation::Delete(RowKey::Blocks { hash: b.hash })));
    Batch {
        kind: BatchKind::Expire,
        index,
        block_range: (lo, hi),
        ops,
    }
}

/// Generates the load batch, every upsert batch (each paired with its expire
/// batch when enabled) and the manifest.
pub fn generate_workload(ds: &ChainDataset, cfg: &WorkloadConfig) -> Result<Workload, WorkloadError> {
    let total = check(ds, cfg)?;
    if cfg.init_blocks == total {
        return Err(WorkloadError::NoBatches { total });
    }
    if cfg.expire && cfg.granularity > cfg.init_blocks {
        return Err(WorkloadError::WindowTooSmall {
            granularity: cfg.granularity,
            init: cfg.init_blocks,
        });
    }
    let (load, mut warnings) = gen_initial(ds, cfg)?;
    let blocks = sorted_blocks(ds);
    let ix = Index::build(ds);
    let ledger = BalanceLedger::build(ds);
    let mut seen = Seen::from_ops(&load.ops);

    let init = cfg.init_blocks as usize;
    let g = cfg.granularity as usize;
    let mut pairs = Vec::new();
    let mut entries = Vec::new();
    let mut window_start = 0usize;
    for (i, chunk) in blocks[init..].chunks(g).enumerate() {
        let index = i + 1;
        let expire = cfg.expire.then(|| {
            let old = &blocks[window_start..window_start + chunk.len()];
            window_start += chunk.len();
            expire_batch(index, old, &ix, &mut seen)
        });
        let upsert = upsert_batch(index, chunk, &ix, &ledger, &mut seen, &mut warnings);
        entries.push(BatchEntry {
            index,
            block_range: upsert.block_range,
            first_timestamp: chunk[0].timestamp,
            short: chunk.len() < g,
            upsert_file: format!("{}.sql", upsert.file_stem()),
            expire_file: expire.as_ref().map(|e| format!("{}.sql", e.file_stem())),
            expire_range: expire.as_ref().map(|e| e.block_range),
        });
        pairs.push(BatchPair { expire, upsert });
    }
    let manifest = WorkloadManifest {
        dialect: super::Dialect::default().tag().to_string(),
        initial_range: load.block_range,
        initial_timestamp: blocks[0].timestamp,
        load_file: "load.sql".to_string(),
        granularity: cfg.granularity,
        expire: cfg.expire,
        batch_count: pairs.len(),
        batches: entries,
    };
    Ok(Workload {
        load,
        batches: pairs,
        manifest,
        warnings,
    })
}

/// Upsert and expire batches with their manifest.
pub fn gen_batches(ds: &ChainDataset, cfg: &WorkloadConfig) -> Result<(Vec<BatchPair>, WorkloadManifest), WorkloadError> {
    let w = generate_workload(ds, cfg)?;
    Ok((w.batches, w.manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn ds(n: u64) -> ChainDataset {
        generate(&SynthConfig {
            seed: 5,
            n_blocks: n,
            mean_tx_per_block: 6.0,
            address_pool: 80,
            n_tokens: 12,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn cfg(init: u64, g: u64, expire: bool) -> WorkloadConfig {
        WorkloadConfig {
            init_blocks: init,
            granularity: g,
            expire,
        }
    }

    #[test]
    fn batch_counts_follow_granularity() {
        let d = ds(40);
        assert_eq!(generate_workload(&d, &cfg(20, 1, false)).unwrap().batches.len(), 20);
        let w = generate_workload(&d, &cfg(20, 5, true)).unwrap();
        assert_eq!(w.batches.len(), 4);
        assert!(w.batches.iter().all(|p| p.expire.is_some()));
        let w = generate_workload(&d, &cfg(20, 6, false)).unwrap();
        assert_eq!(w.manifest.batch_count, 4);
        assert!(w.manifest.batches[3].short);
        assert!(!w.manifest.batches[2].short);
    }

    #[test]
    fn ranges_are_consecutive() {
        let d = ds(30);
        let w = generate_workload(&d, &cfg(10, 7, true)).unwrap();
        let mut next = w.manifest.initial_range.1 + 1;
        let mut exp_next = w.manifest.initial_range.0;
        for e in &w.manifest.batches {
            assert_eq!(e.block_range.0, next);
            next = e.block_range.1 + 1;
            let (elo, ehi) = e.expire_range.unwrap();
            assert_eq!(elo, exp_next);
            assert_eq!(ehi - elo, e.block_range.1 - e.block_range.0);
            exp_next = ehi + 1;
        }
        assert_eq!(next - 1, d.block_range().unwrap().1);
    }

    #[test]
    fn config_errors() {
        let d = ds(10);
        assert_eq!(
            generate_workload(&d, &cfg(11, 1, false)).unwrap_err(),
            WorkloadError::InitTooLarge { init: 11, total: 10 }
        );
        assert_eq!(
            generate_workload(&d, &cfg(10, 1, false)).unwrap_err(),
            WorkloadError::NoBatches { total: 10 }
        );
        assert_eq!(generate_workload(&d, &cfg(5, 0, false)).unwrap_err(), WorkloadError::ZeroGranularity);
        assert!(matches!(
            generate_workload(&d, &cfg(2, 3, true)).unwrap_err(),
            WorkloadError::WindowTooSmall { .. }
        ));
        assert!(gen_initial(&d, &cfg(10, 1, false)).is_ok());
    }

    #[test]
    fn upsert_ops_follow_group_order() {
        let d = ds(30);
        let w = generate_workload(&d, &cfg(10, 5, false)).unwrap();
        let rank = |m: &Mutation| match m {
            Mutation::Insert(Row::Addresses(_)) => 1,
            Mutation::Insert(Row::Blocks(_)) => 2,
            Mutation::Insert(Row::Tokens(_)) | Mutation::Insert(Row::Contracts(_)) => 3,
            Mutation::Insert(Row::Withdrawals(_)) => 4,
            Mutation::Insert(Row::Transactions(_)) => 5,
            Mutation::Insert(Row::TokenTransactions(_)) => 6,
            Mutation::UpdateBalance { .. } => 7,
            other => panic!("unexpected {other:?}"),
        };
        for p in &w.batches {
            let ranks: Vec<_> = p.upsert.ops.iter().map(rank).collect();
            assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn each_row_inserted_once() {
        let d = ds(30);
        let w = generate_workload(&d, &cfg(10, 3, false)).unwrap();
        let mut keys = HashSet::new();
        for b in std::iter::once(&w.load).chain(w.batches.iter().map(|p| &p.upsert)) {
            for m in &b.ops {
                if let Mutation::Insert(r) = m {
                    assert!(keys.insert(r.key()), "{:?} inserted twice", r.key());
                }
            }
        }
        assert_eq!(
            keys.iter().filter(|k| matches!(k, RowKey::Transactions { .. })).count(),
            d.transactions.len()
        );
    }
}
