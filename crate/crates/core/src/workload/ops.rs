use serde::{Deserialize, Serialize};

use crate::chain_model::{AccountAddress, Row, RowKey, SignedWei, Table};

/// One structured state change. Each renders to exactly one SQL statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    Insert(Row),
    UpdateBalance { address: AccountAddress, delta: SignedWei },
    Delete(RowKey),
    /// Sets `block_hash` to null on a token or contract row.
    NullBlockHash(RowKey),
}

impl Mutation {
    pub fn table(&self) -> Table {
        match self {
            Mutation::Insert(r) => r.table(),
            Mutation::UpdateBalance { .. } => Table::Addresses,
            Mutation::Delete(k) | Mutation::NullBlockHash(k) => k.table(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    Load,
    Upsert,
    Expire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub kind: BatchKind,
    /// 1-based for upsert and expire batches, 0 for the initial load.
    pub index: usize,
    /// Inclusive block-number range inserted (load, upsert) or removed
    /// (expire).
    pub block_range: (u64, u64),
    pub ops: Vec<Mutation>,
}

impl Batch {
    pub fn file_stem(&self) -> String {
        match self.kind {
            BatchKind::Load => "load".to_string(),
            BatchKind::Upsert => format!("upserts-{:06}", self.index),
            BatchKind::Expire => format!("expire-{:06}", self.index),
        }
    }

    pub fn label(&self) -> String {
        self.file_stem()
    }
}
