//! Column catalogue of the seven tables and a typed view of column values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::amount::{u256_decimal, U256};
use super::hex::{encode_hex, ByteString, Sighash};
use super::rows::{AddressRow, Block, Contract, Token, TokenTransaction, Transaction, Withdrawal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Blocks,
    Addresses,
    Transactions,
    Contracts,
    Tokens,
    TokenTransactions,
    Withdrawals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Hash,
    Address,
    Bytes,
    Uint,
    Bool,
    Text,
    Sighashes,
}

#[derive(Debug, Clone, Copy)]
pub struct ColumnDef {
    pub name: &'static str,
    pub kind: ColumnKind,
    pub nullable: bool,
}

const fn col(name: &'static str, kind: ColumnKind, nullable: bool) -> ColumnDef {
    ColumnDef { name, kind, nullable }
}

use ColumnKind::*;

const BLOCKS: &[ColumnDef] = &[
    col("hash", Hash, false),
    col("number", Uint, false),
    col("timestamp", Uint, false),
    col("extra_data", Bytes, false),
    col("base_fee_per_gas", Uint, false),
    col("size", Uint, false),
    col("miner", Address, false),
];
const ADDRESSES: &[ColumnDef] = &[col("address", Address, false), col("eth_balance", Uint, false)];
const TRANSACTIONS: &[ColumnDef] = &[
    col("hash", Hash, false),
    col("transaction_index", Uint, false),
    col("value", Uint, false),
    col("from_address", Address, false),
    col("to_address", Address, true),
    col("gas", Uint, false),
    col("max_priority_fee_per_gas", Uint, true),
    col("input", Bytes, false),
    col("block_hash", Hash, false),
    col("transaction_type", Uint, false),
    col("nonce", Uint, false),
];
const CONTRACTS: &[ColumnDef] = &[
    col("address", Address, false),
    col("version", Uint, false),
    col("function_sighashes", Sighashes, false),
    col("bytecode", Bytes, false),
    col("is_erc20", Bool, false),
    col("is_erc721", Bool, false),
    col("block_hash", Hash, true),
];
const TOKENS: &[ColumnDef] = &[
    col("address", Address, false),
    col("symbol", Text, false),
    col("name", Text, false),
    col("decimals", Uint, true),
    col("total_supply", Uint, false),
    col("block_hash", Hash, true),
];
const TOKEN_TRANSACTIONS: &[ColumnDef] = &[
    col("transaction_hash", Hash, false),
    col("log_index", Uint, false),
    col("token_address", Address, false),
    col("value", Uint, false),
];
const WITHDRAWALS: &[ColumnDef] = &[
    col("hash", Hash, false),
    col("withdrawal_index", Uint, false),
    col("validator", Uint, false),
    col("address", Address, false),
    col("amount", Uint, false),
];

impl Table {
    pub const ALL: [Table; 7] = [
        Table::Blocks,
        Table::Addresses,
        Table::Transactions,
        Table::Contracts,
        Table::Tokens,
        Table::TokenTransactions,
        Table::Withdrawals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::Blocks => "blocks",
            Table::Addresses => "addresses",
            Table::Transactions => "transactions",
            Table::Contracts => "contracts",
            Table::Tokens => "tokens",
            Table::TokenTransactions => "token_transactions",
            Table::Withdrawals => "withdrawals",
        }
    }

    pub fn columns(self) -> &'static [ColumnDef] {
        match self {
            Table::Blocks => BLOCKS,
            Table::Addresses => ADDRESSES,
            Table::Transactions => TRANSACTIONS,
            Table::Contracts => CONTRACTS,
            Table::Tokens => TOKENS,
            Table::TokenTransactions => TOKEN_TRANSACTIONS,
            Table::Withdrawals => WITHDRAWALS,
        }
    }

    pub fn column_index(self, name: &str) -> Option<usize> {
        self.columns().iter().position(|c| c.name == name)
    }

    /// Primary-key column names.
    pub fn primary_key(self) -> &'static [&'static str] {
        match self {
            Table::Blocks => &["hash"],
            Table::Addresses => &["address"],
            Table::Transactions => &["hash"],
            Table::Contracts => &["address", "version"],
            Table::Tokens => &["address"],
            Table::TokenTransactions => &["transaction_hash", "log_index"],
            Table::Withdrawals => &["hash", "withdrawal_index"],
        }
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Table {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Table::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown table {s:?}"))
    }
}

/// Borrowed column value. Integers of every width widen to `Uint`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value<'a> {
    Null,
    Bool(bool),
    Uint(U256),
    Text(&'a str),
    Bytes(&'a [u8]),
    Sighashes(&'a [Sighash]),
}

impl Value<'_> {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn to_datum(&self) -> Datum {
        match *self {
            Value::Null => Datum::Null,
            Value::Bool(b) => Datum::Bool(b),
            Value::Uint(u) => Datum::Uint(u),
            Value::Text(t) => Datum::Text(t.to_string()),
            Value::Bytes(b) => Datum::Bytes(ByteString(b.to_vec())),
            Value::Sighashes(s) => Datum::Sighashes(s.to_vec()),
        }
    }
}

/// Owned column value, used for literals and statistics.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Datum {
    Null,
    Bool(bool),
    Uint(#[serde(with = "u256_decimal")] U256),
    Text(String),
    Bytes(ByteString),
    Sighashes(Vec<Sighash>),
}

impl Datum {
    pub fn uint(v: u64) -> Datum {
        Datum::Uint(U256::from(v))
    }

    pub fn as_value(&self) -> Value<'_> {
        match self {
            Datum::Null => Value::Null,
            Datum::Bool(b) => Value::Bool(*b),
            Datum::Uint(u) => Value::Uint(*u),
            Datum::Text(t) => Value::Text(t),
            Datum::Bytes(b) => Value::Bytes(b.as_bytes()),
            Datum::Sighashes(s) => Value::Sighashes(s),
        }
    }

    /// Whether a literal of this shape can be compared against `kind`.
    pub fn fits(&self, kind: ColumnKind) -> bool {
        matches!(
            (self, kind),
            (Datum::Null, _)
                | (Datum::Bool(_), Bool)
                | (Datum::Uint(_), Uint)
                | (Datum::Text(_), Text)
                | (Datum::Bytes(_), Hash | Address | Bytes)
                | (Datum::Sighashes(_), Sighashes)
        )
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Null => f.write_str("NULL"),
            Datum::Bool(b) => write!(f, "{b}"),
            Datum::Uint(u) => write!(f, "{u}"),
            Datum::Text(t) => write!(f, "{t:?}"),
            Datum::Bytes(b) => write!(f, "{b}"),
            Datum::Sighashes(s) => {
                let parts: Vec<_> = s.iter().map(|h| encode_hex(&h.0)).collect();
                f.write_str(&parts.join("|"))
            }
        }
    }
}

/// Positional access to a row's columns, in [`Table::columns`] order.
pub trait RowValues {
    const TABLE: Table;
    fn value(&self, column: usize) -> Value<'_>;
}

fn u64v<'a>(v: u64) -> Value<'a> {
    Value::Uint(U256::from(v))
}

impl RowValues for Block {
    const TABLE: Table = Table::Blocks;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.hash.0),
            1 => u64v(self.number),
            2 => u64v(self.timestamp),
            3 => Value::Bytes(self.extra_data.as_bytes()),
            4 => Value::Uint(self.base_fee_per_gas.0),
            5 => u64v(self.size),
            6 => Value::Bytes(&self.miner.0),
            _ => panic!("blocks has no column {column}"),
        }
    }
}

impl RowValues for AddressRow {
    const TABLE: Table = Table::Addresses;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.address.0),
            1 => Value::Uint(self.eth_balance.0),
            _ => panic!("addresses has no column {column}"),
        }
    }
}

impl RowValues for Transaction {
    const TABLE: Table = Table::Transactions;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.hash.0),
            1 => u64v(self.transaction_index),
            2 => Value::Uint(self.value.0),
            3 => Value::Bytes(&self.from_address.0),
            4 => self.to_address.as_ref().map_or(Value::Null, |a| Value::Bytes(&a.0)),
            5 => u64v(self.gas),
            6 => self.max_priority_fee_per_gas.map_or(Value::Null, |w| Value::Uint(w.0)),
            7 => Value::Bytes(self.input.as_bytes()),
            8 => Value::Bytes(&self.block_hash.0),
            9 => u64v(self.transaction_type as u64),
            10 => u64v(self.nonce),
            _ => panic!("transactions has no column {column}"),
        }
    }
}

impl RowValues for Contract {
    const TABLE: Table = Table::Contracts;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.address.0),
            1 => u64v(self.version),
            2 => Value::Sighashes(&self.function_sighashes),
            3 => Value::Bytes(self.bytecode.as_bytes()),
            4 => Value::Bool(self.is_erc20),
            5 => Value::Bool(self.is_erc721),
            6 => self.block_hash.as_ref().map_or(Value::Null, |h| Value::Bytes(&h.0)),
            _ => panic!("contracts has no column {column}"),
        }
    }
}

impl RowValues for Token {
    const TABLE: Table = Table::Tokens;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.address.0),
            1 => Value::Text(&self.symbol),
            2 => Value::Text(&self.name),
            3 => self.decimals.map_or(Value::Null, |d| u64v(d as u64)),
            4 => Value::Uint(self.total_supply),
            5 => self.block_hash.as_ref().map_or(Value::Null, |h| Value::Bytes(&h.0)),
            _ => panic!("tokens has no column {column}"),
        }
    }
}

impl RowValues for TokenTransaction {
    const TABLE: Table = Table::TokenTransactions;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.transaction_hash.0),
            1 => u64v(self.log_index),
            2 => Value::Bytes(&self.token_address.0),
            3 => Value::Uint(self.value),
            _ => panic!("token_transactions has no column {column}"),
        }
    }
}

impl RowValues for Withdrawal {
    const TABLE: Table = Table::Withdrawals;
    fn value(&self, column: usize) -> Value<'_> {
        match column {
            0 => Value::Bytes(&self.hash.0),
            1 => u64v(self.withdrawal_index),
            2 => u64v(self.validator),
            3 => Value::Bytes(&self.address.0),
            4 => Value::Uint(self.amount.0),
            _ => panic!("withdrawals has no column {column}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_lookup() {
        assert_eq!(Table::Transactions.column_index("nonce"), Some(10));
        assert_eq!(Table::Tokens.column_index("nope"), None);
        assert_eq!("token_transactions".parse::<Table>().unwrap(), Table::TokenTransactions);
        for t in Table::ALL {
            for k in t.primary_key() {
                assert!(t.column_index(k).is_some());
            }
        }
    }

    #[test]
    fn datum_json_shape() {
        let d = Datum::uint(2_100_000);
        assert_eq!(serde_json::to_string(&d).unwrap(), r#"{"uint":"2100000"}"#);
        let back: Datum = serde_json::from_str(r#"{"text":"US"}"#).unwrap();
        assert_eq!(back, Datum::Text("US".into()));
    }
}
