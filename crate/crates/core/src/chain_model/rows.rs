use serde::{Deserialize, Serialize};

use super::amount::{u256_decimal, Wei, U256};
use super::hex::{AccountAddress, ByteString, HashId, Sighash};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub hash: HashId,
    pub number: u64,
    pub timestamp: u64,
    pub extra_data: ByteString,
    pub base_fee_per_gas: Wei,
    pub size: u64,
    pub miner: AccountAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressRow {
    pub address: AccountAddress,
    pub eth_balance: Wei,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub hash: HashId,
    pub transaction_index: u64,
    pub value: Wei,
    pub from_address: AccountAddress,
    /// `None` for contract-creation transactions.
    pub to_address: Option<AccountAddress>,
    pub gas: u64,
    pub max_priority_fee_per_gas: Option<Wei>,
    pub input: ByteString,
    pub block_hash: HashId,
    pub transaction_type: u8,
    pub nonce: u64,
}

pub const MAX_TRANSACTION_TYPE: u8 = 0x7f;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub address: AccountAddress,
    pub version: u64,
    pub function_sighashes: Vec<Sighash>,
    pub bytecode: ByteString,
    pub is_erc20: bool,
    pub is_erc721: bool,
    /// Creating block, or `None` when it lies outside the dataset.
    pub block_hash: Option<HashId>,
}

impl Contract {
    pub fn key(&self) -> (AccountAddress, u64) {
        (self.address, self.version)
    }
}

/// Decimals assumed when a token does not declare them.
pub const DEFAULT_TOKEN_DECIMALS: u32 = 18;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub address: AccountAddress,
    pub symbol: String,
    pub name: String,
    pub decimals: Option<u32>,
    #[serde(with = "u256_decimal")]
    pub total_supply: U256,
    pub block_hash: Option<HashId>,
}

impl Token {
    pub fn effective_decimals(&self) -> u32 {
        self.decimals.unwrap_or(DEFAULT_TOKEN_DECIMALS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTransaction {
    pub transaction_hash: HashId,
    pub log_index: u64,
    pub token_address: AccountAddress,
    #[serde(with = "u256_decimal")]
    pub value: U256,
}

impl TokenTransaction {
    pub fn key(&self) -> (HashId, u64) {
        (self.transaction_hash, self.log_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Withdrawal {
    /// Hash of the block the withdrawal belongs to.
    pub hash: HashId,
    pub withdrawal_index: u64,
    pub validator: u64,
    pub address: AccountAddress,
    pub amount: Wei,
}

impl Withdrawal {
    pub fn key(&self) -> (HashId, u64) {
        (self.hash, self.withdrawal_index)
    }
}
