//! Domain types for the seven-table chain schema.

mod amount;
mod dataset;
mod hex;
mod row_enum;
mod rows;
pub mod schema;
mod validate;

pub use amount::{parse_u256, u256_to_f64, AmountError, SignedWei, Wei, U256};
pub use dataset::{BalanceSnapshot, ChainDataset, SliceSpec};
pub use hex::{decode_hex, encode_hex, AccountAddress, ByteString, HashId, HexError, Sighash};
pub use row_enum::{Row, RowKey};
pub use rows::{
    AddressRow, Block, Contract, Token, TokenTransaction, Transaction, Withdrawal, DEFAULT_TOKEN_DECIMALS,
    MAX_TRANSACTION_TYPE,
};
pub use schema::{ColumnDef, ColumnKind, Datum, RowValues, Table, Value};
pub use validate::{validate_dataset, ValidationReport, Violation, ViolationKind};
