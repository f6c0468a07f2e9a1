use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::chain_model::{
    AccountAddress, AddressRow, Block, ChainDataset, Contract, HashId, Row, RowKey, SignedWei, Table, Token,
    TokenTransaction, Transaction, Value, Wei, Withdrawal, MAX_TRANSACTION_TYPE,
};
use crate::workload::{Batch, Mutation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreErrorKind {
    DuplicateKey,
    UniqueViolation(&'static str),
    DanglingReference(&'static str),
    StillReferenced,
    MissingRow,
    BalanceUnderflow,
    InvalidValue(&'static str),
    NoBlockHash,
}

impl fmt::Display for StoreErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreErrorKind::DuplicateKey => write!(f, "duplicate primary key"),
            StoreErrorKind::UniqueViolation(c) => write!(f, "duplicate value in unique column {c}"),
            StoreErrorKind::DanglingReference(c) => write!(f, "foreign key {c} references a missing row"),
            StoreErrorKind::StillReferenced => write!(f, "row is still referenced"),
            StoreErrorKind::MissingRow => write!(f, "no such row"),
            StoreErrorKind::BalanceUnderflow => write!(f, "balance would become negative"),
            StoreErrorKind::InvalidValue(c) => write!(f, "invalid value in column {c}"),
            StoreErrorKind::NoBlockHash => write!(f, "table has no block_hash column to null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("op {op_index} ({table}): {kind}")]
pub struct StoreError {
    pub op_index: usize,
    pub table: Table,
    pub kind: StoreErrorKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TableCounts {
    pub inserts: usize,
    pub updates: usize,
    pub deletes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MutationSummary {
    pub tables: BTreeMap<Table, TableCounts>,
}

impl MutationSummary {
    pub fn total(&self) -> usize {
        self.tables.values().map(|c| c.inserts + c.updates + c.deletes).sum()
    }
}

/// Borrowed row of any table.
#[derive(Debug, Clone, Copy)]
pub enum AnyRow<'a> {
    Block(&'a Block),
    Address(&'a AddressRow),
    Transaction(&'a Transaction),
    Contract(&'a Contract),
    Token(&'a Token),
    TokenTransaction(&'a TokenTransaction),
    Withdrawal(&'a Withdrawal),
}

impl<'a> AnyRow<'a> {
    pub fn value(self, column: usize) -> Value<'a> {
        use crate::chain_model::RowValues;
        match self {
            AnyRow::Block(r) => r.value(column),
            AnyRow::Address(r) => r.value(column),
            AnyRow::Transaction(r) => r.value(column),
            AnyRow::Contract(r) => r.value(column),
            AnyRow::Token(r) => r.value(column),
            AnyRow::TokenTransaction(r) => r.value(column),
            AnyRow::Withdrawal(r) => r.value(column),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RefTarget {
    Block(HashId),
    Address(AccountAddress),
    Transaction(HashId),
    Token(AccountAddress),
}

/// In-memory store over the seven tables with key, unique and foreign-key
/// enforcement on every mutation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    blocks: BTreeMap<HashId, Block>,
    block_numbers: BTreeMap<u64, HashId>,
    addresses: BTreeMap<AccountAddress, AddressRow>,
    transactions: BTreeMap<HashId, Transaction>,
    tx_slots: BTreeSet<(HashId, u64)>,
    contracts: BTreeMap<(AccountAddress, u64), Contract>,
    tokens: BTreeMap<AccountAddress, Token>,
    token_transactions: BTreeMap<(HashId, u64), TokenTransaction>,
    withdrawals: BTreeMap<(HashId, u64), Withdrawal>,
    withdrawal_indexes: BTreeSet<u64>,
    /// Number of rows referencing each target; zero counts are absent.
    refs: HashMap<RefTarget, usize>,
}

enum Undo {
    Remove(RowKey),
    Restore(Row),
    Balance(AccountAddress, Wei),
    BlockHash(RowKey, Option<HashId>),
}

fn row_refs(row: &Row) -> Vec<(RefTarget, &'static str)> {
    match row {
        Row::Blocks(b) => vec![(RefTarget::Address(b.miner), "blocks.miner")],
        Row::Addresses(_) => vec![],
        Row::Transactions(t) => {
            let mut v = vec![
                (RefTarget::Block(t.block_hash), "transactions.block_hash"),
                (RefTarget::Address(t.from_address), "transactions.from_address"),
            ];
            if let Some(to) = t.to_address {
                v.push((RefTarget::Address(to), "transactions.to_address"));
            }
            v
        }
        Row::Contracts(c) => {
            let mut v = vec![(RefTarget::Address(c.address), "contracts.address")];
            if let Some(h) = c.block_hash {
                v.push((RefTarget::Block(h), "contracts.block_hash"));
            }
            v
        }
        Row::Tokens(t) => {
            let mut v = vec![(RefTarget::Address(t.address), "tokens.address")];
            if let Some(h) = t.block_hash {
                v.push((RefTarget::Block(h), "tokens.block_hash"));
            }
            v
        }
        Row::TokenTransactions(t) => vec![
            (RefTarget::Transaction(t.transaction_hash), "token_transactions.transaction_hash"),
            (RefTarget::Token(t.token_address), "token_transactions.token_address"),
        ],
        Row::Withdrawals(w) => vec![
            (RefTarget::Block(w.hash), "withdrawals.hash"),
            (RefTarget::Address(w.address), "withdrawals.address"),
        ],
    }
}

fn target_of(key: &RowKey) -> Option<RefTarget> {
    match *key {
        RowKey::Blocks { hash } => Some(RefTarget::Block(hash)),
        RowKey::Addresses { address } => Some(RefTarget::Address(address)),
        RowKey::Transactions { hash } => Some(RefTarget::Transaction(hash)),
        RowKey::Tokens { address } => Some(RefTarget::Token(address)),
        _ => None,
    }
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    fn exists(&self, t: RefTarget) -> bool {
        match t {
            RefTarget::Block(h) => self.blocks.contains_key(&h),
            RefTarget::Address(a) => self.addresses.contains_key(&a),
            RefTarget::Transaction(h) => self.transactions.contains_key(&h),
            RefTarget::Token(a) => self.tokens.contains_key(&a),
        }
    }

    fn add_ref(&mut self, t: RefTarget) {
        *self.refs.entry(t).or_insert(0) += 1;
    }

    fn drop_ref(&mut self, t: RefTarget) {
        if let Some(n) = self.refs.get_mut(&t) {
            *n -= 1;
            if *n == 0 {
                self.refs.remove(&t);
            }
        }
    }

    fn contains_key(&self, key: &RowKey) -> bool {
        match key {
            RowKey::Blocks { hash } => self.blocks.contains_key(hash),
            RowKey::Addresses { address } => self.addresses.contains_key(address),
            RowKey::Transactions { hash } => self.transactions.contains_key(hash),
            RowKey::Contracts { address, version } => self.contracts.contains_key(&(*address, *version)),
            RowKey::Tokens { address } => self.tokens.contains_key(address),
            RowKey::TokenTransactions {
                transaction_hash,
                log_index,
            } => self.token_transactions.contains_key(&(*transaction_hash, *log_index)),
            RowKey::Withdrawals { hash, withdrawal_index } => {
                self.withdrawals.contains_key(&(*hash, *withdrawal_index))
            }
        }
    }

    fn insert(&mut self, row: Row) -> Result<(), StoreErrorKind> {
        if self.contains_key(&row.key()) {
            return Err(StoreErrorKind::DuplicateKey);
        }
        match &row {
            Row::Blocks(b) if self.block_numbers.contains_key(&b.number) => {
                return Err(StoreErrorKind::UniqueViolation("blocks.number"))
            }
            Row::Transactions(t) if self.tx_slots.contains(&(t.block_hash, t.transaction_index)) => {
                return Err(StoreErrorKind::UniqueViolation("transactions.transaction_index"))
            }
            Row::Transactions(t) if t.transaction_type > MAX_TRANSACTION_TYPE => {
                return Err(StoreErrorKind::InvalidValue("transactions.transaction_type"))
            }
            Row::Withdrawals(w) if self.withdrawal_indexes.contains(&w.withdrawal_index) => {
                return Err(StoreErrorKind::UniqueViolation("withdrawals.withdrawal_index"))
            }
            _ => {}
        }
        let refs = row_refs(&row);
        if let Some((_, col)) = refs.iter().find(|(t, _)| !self.exists(*t)) {
            return Err(StoreErrorKind::DanglingReference(col));
        }
        for (t, _) in refs {
            self.add_ref(t);
        }
        match row {
            Row::Blocks(b) => {
                self.block_numbers.insert(b.number, b.hash);
                self.blocks.insert(b.hash, b);
            }
            Row::Addresses(a) => {
                self.addresses.insert(a.address, a);
            }
            Row::Transactions(t) => {
                self.tx_slots.insert((t.block_hash, t.transaction_index));
                self.transactions.insert(t.hash, t);
            }
            Row::Contracts(c) => {
                self.contracts.insert(c.key(), c);
            }
            Row::Tokens(t) => {
                self.tokens.insert(t.address, t);
            }
            Row::TokenTransactions(t) => {
                self.token_transactions.insert(t.key(), t);
            }
            Row::Withdrawals(w) => {
                self.withdrawal_indexes.insert(w.withdrawal_index);
                self.withdrawals.insert(w.key(), w);
            }
        }
        Ok(())
    }

    fn delete(&mut self, key: &RowKey) -> Result<Row, StoreErrorKind> {
        if !self.contains_key(key) {
            return Err(StoreErrorKind::MissingRow);
        }
        if target_of(key).is_some_and(|t| self.refs.contains_key(&t)) {
            return Err(StoreErrorKind::StillReferenced);
        }
        let row = match *key {
            RowKey::Blocks { hash } => {
                let b = self.blocks.remove(&hash).expect("checked");
                self.block_numbers.remove(&b.number);
                Row::Blocks(b)
            }
            RowKey::Addresses { address } => Row::Addresses(self.addresses.remove(&address).expect("checked")),
            RowKey::Transactions { hash } => {
                let t = self.transactions.remove(&hash).expect("checked");
                self.tx_slots.remove(&(t.block_hash, t.transaction_index));
                Row::Transactions(t)
            }
            RowKey::Contracts { address, version } => {
                Row::Contracts(self.contracts.remove(&(address, version)).expect("checked"))
            }
            RowKey::Tokens { address } => Row::Tokens(self.tokens.remove(&address).expect("checked")),
            RowKey::TokenTransactions {
                transaction_hash,
                log_index,
            } => Row::TokenTransactions(
                self.token_transactions
                    .remove(&(transaction_hash, log_index))
                    .expect("checked"),
            ),
            RowKey::Withdrawals { hash, withdrawal_index } => {
                let w = self.withdrawals.remove(&(hash, withdrawal_index)).expect("checked");
                self.withdrawal_indexes.remove(&w.withdrawal_index);
                Row::Withdrawals(w)
            }
        };
        for (t, _) in row_refs(&row) {
            self.drop_ref(t);
        }
        Ok(row)
    }

    fn set_balance(&mut self, a: &AccountAddress, delta: SignedWei) -> Result<Wei, StoreErrorKind> {
        let row = self.addresses.get_mut(a).ok_or(StoreErrorKind::MissingRow)?;
        let old = row.eth_balance;
        row.eth_balance = delta.apply_to(old).map_err(|_| StoreErrorKind::BalanceUnderflow)?;
        Ok(old)
    }

    fn set_block_hash(&mut self, key: &RowKey, hash: Option<HashId>) -> Result<Option<HashId>, StoreErrorKind> {
        if let Some(h) = hash {
            if !self.blocks.contains_key(&h) {
                return Err(StoreErrorKind::DanglingReference("block_hash"));
            }
        }
        let slot = match key {
            RowKey::Tokens { address } => &mut self.tokens.get_mut(address).ok_or(StoreErrorKind::MissingRow)?.block_hash,
            RowKey::Contracts { address, version } => {
                &mut self
                    .contracts
                    .get_mut(&(*address, *version))
                    .ok_or(StoreErrorKind::MissingRow)?
                    .block_hash
            }
            _ => return Err(StoreErrorKind::NoBlockHash),
        };
        let old = std::mem::replace(slot, hash);
        if let Some(h) = old {
            self.drop_ref(RefTarget::Block(h));
        }
        if let Some(h) = hash {
            self.add_ref(RefTarget::Block(h));
        }
        Ok(old)
    }

    fn apply_one(&mut self, m: &Mutation, summary: &mut MutationSummary) -> Result<Undo, StoreErrorKind> {
        let counts = summary.tables.entry(m.table()).or_default();
        match m {
            Mutation::Insert(row) => {
                self.insert(row.clone())?;
                counts.inserts += 1;
                Ok(Undo::Remove(row.key()))
            }
            Mutation::Delete(key) => {
                let row = self.delete(key)?;
                counts.deletes += 1;
                Ok(Undo::Restore(row))
            }
            Mutation::UpdateBalance { address, delta } => {
                let old = self.set_balance(address, *delta)?;
                counts.updates += 1;
                Ok(Undo::Balance(*address, old))
            }
            Mutation::NullBlockHash(key) => {
                let old = self.set_block_hash(key, None)?;
                counts.updates += 1;
                Ok(Undo::BlockHash(*key, old))
            }
        }
    }

    /// Applies every mutation of `batch` or none of them.
    pub fn apply(&mut self, batch: &Batch) -> Result<MutationSummary, StoreError> {
        self.apply_ops(&batch.ops)
    }

    pub fn apply_ops(&mut self, ops: &[Mutation]) -> Result<MutationSummary, StoreError> {
        let mut summary = MutationSummary::default();
        let mut undo = Vec::with_capacity(ops.len());
        for (i, m) in ops.iter().enumerate() {
            match self.apply_one(m, &mut summary) {
                Ok(u) => undo.push(u),
                Err(kind) => {
                    self.rollback(undo);
                    return Err(StoreError {
                        op_index: i,
                        table: m.table(),
                        kind,
                    });
                }
            }
        }
        Ok(summary)
    }

    fn rollback(&mut self, undo: Vec<Undo>) {
        for u in undo.into_iter().rev() {
            let r = match u {
                Undo::Remove(k) => self.delete(&k).map(drop),
                Undo::Restore(row) => self.insert(row),
                Undo::Balance(a, w) => {
                    self.addresses.get_mut(&a).expect("row exists").eth_balance = w;
                    Ok(())
                }
                Undo::BlockHash(k, h) => self.set_block_hash(&k, h).map(drop),
            };
            r.expect("undo of an applied mutation succeeds");
        }
    }

    /// Block numbers currently stored, ascending.
    pub fn snapshot_blocks(&self) -> Vec<u64> {
        self.block_numbers.keys().copied().collect()
    }

    pub fn len(&self, table: Table) -> usize {
        match table {
            Table::Blocks => self.blocks.len(),
            Table::Addresses => self.addresses.len(),
            Table::Transactions => self.transactions.len(),
            Table::Contracts => self.contracts.len(),
            Table::Tokens => self.tokens.len(),
            Table::TokenTransactions => self.token_transactions.len(),
            Table::Withdrawals => self.withdrawals.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        Table::ALL.iter().all(|t| self.len(*t) == 0)
    }

    pub fn balance(&self, a: &AccountAddress) -> Option<Wei> {
        self.addresses.get(a).map(|r| r.eth_balance)
    }

    /// Rows of `table` in primary-key order.
    pub fn rows(&self, table: Table) -> Box<dyn Iterator<Item = AnyRow<'_>> + '_> {
        match table {
            Table::Blocks => Box::new(self.blocks.values().map(AnyRow::Block)),
            Table::Addresses => Box::new(self.addresses.values().map(AnyRow::Address)),
            Table::Transactions => Box::new(self.transactions.values().map(AnyRow::Transaction)),
            Table::Contracts => Box::new(self.contracts.values().map(AnyRow::Contract)),
            Table::Tokens => Box::new(self.tokens.values().map(AnyRow::Token)),
            Table::TokenTransactions => Box::new(self.token_transactions.values().map(AnyRow::TokenTransaction)),
            Table::Withdrawals => Box::new(self.withdrawals.values().map(AnyRow::Withdrawal)),
        }
    }

    /// Current contents as a canonical dataset with a balance snapshot
    /// tagged at the highest stored block.
    pub fn to_dataset(&self) -> ChainDataset {
        let mut ds = ChainDataset {
            blocks: self.blocks.values().cloned().collect(),
            addresses: self.addresses.values().cloned().collect(),
            transactions: self.transactions.values().cloned().collect(),
            contracts: self.contracts.values().cloned().collect(),
            tokens: self.tokens.values().cloned().collect(),
            token_transactions: self.token_transactions.values().cloned().collect(),
            withdrawals: self.withdrawals.values().cloned().collect(),
            ..ChainDataset::default()
        };
        ds.final_balances.as_of_block = self.block_numbers.keys().next_back().copied().unwrap_or(0);
        ds.final_balances.balances = self.addresses.values().map(|a| (a.address, a.eth_balance)).collect();
        ds.canonicalize();
        ds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::validate_dataset;
    use crate::synth::{generate, SynthConfig};
    use crate::workload::{generate_workload, WorkloadConfig};

    fn dataset() -> ChainDataset {
        generate(&SynthConfig {
            seed: 17,
            n_blocks: 30,
            mean_tx_per_block: 8.0,
            address_pool: 70,
            n_tokens: 10,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn empty_batch_changes_nothing() {
        let mut s = Store::new();
        let summary = s.apply_ops(&[]).unwrap();
        assert_eq!(summary.total(), 0);
        assert_eq!(s, Store::new());
        assert!(s.snapshot_blocks().is_empty());
    }

    #[test]
    fn load_then_replay_matches_final_balances_and_validates() {
        let ds = dataset();
        let w = generate_workload(
            &ds,
            &WorkloadConfig {
                init_blocks: 10,
                granularity: 4,
                expire: false,
            },
        )
        .unwrap();
        let mut s = Store::new();
        s.apply(&w.load).unwrap();
        assert_eq!(s.snapshot_blocks(), ds.blocks[..10].iter().map(|b| b.number).collect::<Vec<_>>());
        assert!(validate_dataset(&s.to_dataset()).is_clean());
        for p in &w.batches {
            for b in p.in_order() {
                s.apply(b).unwrap();
            }
            assert!(validate_dataset(&s.to_dataset()).is_clean());
        }
        for a in &ds.addresses {
            assert_eq!(s.balance(&a.address), Some(ds.final_balances.get(&a.address)));
        }
        assert_eq!(s.len(Table::Transactions), ds.transactions.len());
    }

    #[test]
    fn rejected_batch_leaves_store_identical() {
        let ds = dataset();
        let w = generate_workload(
            &ds,
            &WorkloadConfig {
                init_blocks: 10,
                granularity: 5,
                expire: true,
            },
        )
        .unwrap();
        let mut s = Store::new();
        s.apply(&w.load).unwrap();
        let before = s.clone();
        // The upsert batch followed by a duplicate of its first op fails at
        // the very end.
        let mut ops = w.batches[0].upsert.ops.clone();
        ops.push(ops[0].clone());
        let err = s.apply_ops(&ops).unwrap_err();
        assert_eq!(err.op_index, ops.len() - 1);
        assert_eq!(err.kind, StoreErrorKind::DuplicateKey);
        assert_eq!(s, before);
        // The expire batch applied after a partial failure still works.
        let exp = w.batches[0].expire.as_ref().unwrap();
        let mut bad = exp.ops.clone();
        bad.push(Mutation::Delete(RowKey::Blocks { hash: HashId([0xee; 32]) }));
        assert!(s.apply_ops(&bad).is_err());
        assert_eq!(s, before);
        s.apply(exp).unwrap();
        s.apply(&w.batches[0].upsert).unwrap();
        assert_eq!(s.snapshot_blocks(), ds.blocks[5..15].iter().map(|b| b.number).collect::<Vec<_>>());
    }

    #[test]
    fn transaction_before_block_is_rejected() {
        let ds = dataset();
        let mut s = Store::new();
        for a in &ds.addresses {
            s.apply_ops(&[Mutation::Insert(Row::Addresses(a.clone()))]).unwrap();
        }
        let t = ds.transactions[0].clone();
        let err = s.apply_ops(&[Mutation::Insert(Row::Transactions(t))]).unwrap_err();
        assert_eq!(err.op_index, 0);
        assert_eq!(err.kind, StoreErrorKind::DanglingReference("transactions.block_hash"));
        assert!(err.to_string().contains("op 0 (transactions)"));
    }

    #[test]
    fn referenced_rows_cannot_be_deleted_and_balances_cannot_underflow() {
        let ds = dataset();
        let w = generate_workload(
            &ds,
            &WorkloadConfig {
                init_blocks: 10,
                granularity: 5,
                expire: false,
            },
        )
        .unwrap();
        let mut s = Store::new();
        s.apply(&w.load).unwrap();
        let b = ds.blocks[0].hash;
        let err = s.apply_ops(&[Mutation::Delete(RowKey::Blocks { hash: b })]).unwrap_err();
        assert_eq!(err.kind, StoreErrorKind::StillReferenced);
        let a = ds.addresses[0].address;
        let bal = s.balance(&a).unwrap();
        let over = SignedWei::negative(bal.checked_add(Wei::from_u64(1)).unwrap());
        let err = s.apply_ops(&[Mutation::UpdateBalance { address: a, delta: over }]).unwrap_err();
        assert_eq!(err.kind, StoreErrorKind::BalanceUnderflow);
        assert_eq!(s.balance(&a), Some(bal));
    }
}
