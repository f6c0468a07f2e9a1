use serde::{Deserialize, Serialize};

use super::hex::{AccountAddress, HashId};
use super::rows::{AddressRow, Block, Contract, Token, TokenTransaction, Transaction, Withdrawal};
use super::schema::{Datum, RowValues, Table, Value};

/// A row of any table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "table", content = "row", rename_all = "snake_case")]
pub enum Row {
    Blocks(Block),
    Addresses(AddressRow),
    Transactions(Transaction),
    Contracts(Contract),
    Tokens(Token),
    TokenTransactions(TokenTransaction),
    Withdrawals(Withdrawal),
}

/// Primary key of a row of any table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "table", rename_all = "snake_case")]
pub enum RowKey {
    Blocks { hash: HashId },
    Addresses { address: AccountAddress },
    Transactions { hash: HashId },
    Contracts { address: AccountAddress, version: u64 },
    Tokens { address: AccountAddress },
    TokenTransactions { transaction_hash: HashId, log_index: u64 },
    Withdrawals { hash: HashId, withdrawal_index: u64 },
}

impl Row {
    pub fn table(&self) -> Table {
        match self {
            Row::Blocks(_) => Table::Blocks,
            Row::Addresses(_) => Table::Addresses,
            Row::Transactions(_) => Table::Transactions,
            Row::Contracts(_) => Table::Contracts,
            Row::Tokens(_) => Table::Tokens,
            Row::TokenTransactions(_) => Table::TokenTransactions,
            Row::Withdrawals(_) => Table::Withdrawals,
        }
    }

    pub fn value(&self, column: usize) -> Value<'_> {
        match self {
            Row::Blocks(r) => r.value(column),
            Row::Addresses(r) => r.value(column),
            Row::Transactions(r) => r.value(column),
            Row::Contracts(r) => r.value(column),
            Row::Tokens(r) => r.value(column),
            Row::TokenTransactions(r) => r.value(column),
            Row::Withdrawals(r) => r.value(column),
        }
    }

    pub fn key(&self) -> RowKey {
        match self {
            Row::Blocks(r) => RowKey::Blocks { hash: r.hash },
            Row::Addresses(r) => RowKey::Addresses { address: r.address },
            Row::Transactions(r) => RowKey::Transactions { hash: r.hash },
            Row::Contracts(r) => RowKey::Contracts {
                address: r.address,
                version: r.version,
            },
            Row::Tokens(r) => RowKey::Tokens { address: r.address },
            Row::TokenTransactions(r) => RowKey::TokenTransactions {
                transaction_hash: r.transaction_hash,
                log_index: r.log_index,
            },
            Row::Withdrawals(r) => RowKey::Withdrawals {
                hash: r.hash,
                withdrawal_index: r.withdrawal_index,
            },
        }
    }
}

impl RowKey {
    pub fn table(&self) -> Table {
        match self {
            RowKey::Blocks { .. } => Table::Blocks,
            RowKey::Addresses { .. } => Table::Addresses,
            RowKey::Transactions { .. } => Table::Transactions,
            RowKey::Contracts { .. } => Table::Contracts,
            RowKey::Tokens { .. } => Table::Tokens,
            RowKey::TokenTransactions { .. } => Table::TokenTransactions,
            RowKey::Withdrawals { .. } => Table::Withdrawals,
        }
    }

    /// Key values in the order of [`Table::primary_key`].
    pub fn values(&self) -> Vec<Datum> {
        let h = |h: &HashId| Datum::Bytes(super::ByteString(h.0.to_vec()));
        let a = |a: &AccountAddress| Datum::Bytes(super::ByteString(a.0.to_vec()));
        match self {
            RowKey::Blocks { hash } | RowKey::Transactions { hash } => vec![h(hash)],
            RowKey::Addresses { address } | RowKey::Tokens { address } => vec![a(address)],
            RowKey::Contracts { address, version } => vec![a(address), Datum::uint(*version)],
            RowKey::TokenTransactions {
                transaction_hash,
                log_index,
            } => vec![h(transaction_hash), Datum::uint(*log_index)],
            RowKey::Withdrawals { hash, withdrawal_index } => vec![h(hash), Datum::uint(*withdrawal_index)],
        }
    }
}

macro_rules! row_from {
    ($($ty:ty => $variant:ident),*) => {$(
        impl From<$ty> for Row {
            fn from(r: $ty) -> Row {
                Row::$variant(r)
            }
        }
    )*};
}

row_from!(Block => Blocks, AddressRow => Addresses, Transaction => Transactions, Contract => Contracts,
    Token => Tokens, TokenTransaction => TokenTransactions, Withdrawal => Withdrawals);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::Wei;

    #[test]
    fn key_values_follow_primary_key_columns() {
        let a = AccountAddress([3; 20]);
        let row = Row::from(AddressRow {
            address: a,
            eth_balance: Wei::from_u64(7),
        });
        let key = row.key();
        assert_eq!(key.table(), Table::Addresses);
        let pk = Table::Addresses.primary_key();
        let vals = key.values();
        assert_eq!(pk.len(), vals.len());
        let col = Table::Addresses.column_index(pk[0]).unwrap();
        assert_eq!(row.value(col).to_datum(), vals[0]);
    }

    #[test]
    fn json_shape_is_tagged_by_table() {
        let key = RowKey::Contracts {
            address: AccountAddress([0; 20]),
            version: 2,
        };
        let s = serde_json::to_string(&key).unwrap();
        assert_eq!(
            s,
            r#"{"table":"contracts","address":"0x0000000000000000000000000000000000000000","version":2}"#
        );
        assert_eq!(serde_json::from_str::<RowKey>(&s).unwrap(), key);
    }
}
