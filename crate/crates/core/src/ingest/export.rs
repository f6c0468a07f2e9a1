//! CSV export format: one file per table plus `balances.csv` and
//! `manifest.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain_model::{
    parse_u256, AccountAddress, AddressRow, BalanceSnapshot, Block, ByteString, ChainDataset, Contract, HashId,
    Sighash, Table, Token, TokenTransaction, Transaction, Wei, Withdrawal, U256,
};

pub const BALANCES_FILE: &str = "balances.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
const BALANCE_COLUMNS: [&str; 3] = ["address", "eth_balance", "as_of_block"];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("table {table}: file not found ({})", path.display())]
    MissingTable { table: String, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: column {column}: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}: {message}")]
    Header { file: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub row_counts: BTreeMap<String, usize>,
    /// Inclusive block-number range, absent for an empty dataset.
    pub block_range: Option<(u64, u64)>,
    pub as_of_block: u64,
    pub balance_rows: usize,
}

/// Parsed export, not yet checked for key or foreign-key integrity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub dataset: ChainDataset,
}

impl RawDataset {
    pub fn snapshot(&self) -> &BalanceSnapshot {
        &self.dataset.final_balances
    }

    pub fn into_dataset(self) -> ChainDataset {
        self.dataset
    }
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn sighashes_to_field(s: &[Sighash]) -> String {
    s.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("|")
}

fn block_fields(b: &Block) -> Vec<String> {
    vec![
        b.hash.to_string(),
        b.number.to_string(),
        b.timestamp.to_string(),
        b.extra_data.to_string(),
        b.base_fee_per_gas.to_string(),
        b.size.to_string(),
        b.miner.to_string(),
    ]
}

fn address_fields(a: &AddressRow) -> Vec<String> {
    vec![a.address.to_string(), a.eth_balance.to_string()]
}

fn transaction_fields(t: &Transaction) -> Vec<String> {
    vec![
        t.hash.to_string(),
        t.transaction_index.to_string(),
        t.value.to_string(),
        t.from_address.to_string(),
        opt(t.to_address, |a| a.to_string()),
        t.gas.to_string(),
        opt(t.max_priority_fee_per_gas, |w| w.to_string()),
        t.input.to_string(),
        t.block_hash.to_string(),
        t.transaction_type.to_string(),
        t.nonce.to_string(),
    ]
}

fn contract_fields(c: &Contract) -> Vec<String> {
    vec![
        c.address.to_string(),
        c.version.to_string(),
        sighashes_to_field(&c.function_sighashes),
        c.bytecode.to_string(),
        c.is_erc20.to_string(),
        c.is_erc721.to_string(),
        opt(c.block_hash, |h| h.to_string()),
    ]
}

fn token_fields(t: &Token) -> Vec<String> {
    vec![
        t.address.to_string(),
        t.symbol.clone(),
        t.name.clone(),
        opt(t.decimals, |d| d.to_string()),
        t.total_supply.to_string(),
        opt(t.block_hash, |h| h.to_string()),
    ]
}

fn token_tx_fields(t: &TokenTransaction) -> Vec<String> {
    vec![
        t.transaction_hash.to_string(),
        t.log_index.to_string(),
        t.token_address.to_string(),
        t.value.to_string(),
    ]
}

fn withdrawal_fields(w: &Withdrawal) -> Vec<String> {
    vec![
        w.hash.to_string(),
        w.withdrawal_index.to_string(),
        w.validator.to_string(),
        w.address.to_string(),
        w.amount.to_string(),
    ]
}

fn header(table: Table) -> Vec<&'static str> {
    table.columns().iter().map(|c| c.name).collect()
}

pub fn table_file(table: Table) -> String {
    format!("{}.csv", table.name())
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), ExportError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(io::BufWriter::new(file));
    let csv_err = |e: csv::Error| ExportError::Io {
        path: path.to_path_buf(),
        source: io::Error::other(e),
    };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `ds` in the export format under `dir`, creating it if needed.
pub fn write_export(ds: &ChainDataset, dir: &Path) -> Result<ExportManifest, ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = |t: Table| dir.join(table_file(t));
    write_csv(&p(Table::Blocks), &header(Table::Blocks), ds.blocks.iter().map(block_fields))?;
    write_csv(&p(Table::Addresses), &header(Table::Addresses), ds.addresses.iter().map(address_fields))?;
    write_csv(
        &p(Table::Transactions),
        &header(Table::Transactions),
        ds.transactions.iter().map(transaction_fields),
    )?;
    write_csv(&p(Table::Contracts), &header(Table::Contracts), ds.contracts.iter().map(contract_fields))?;
    write_csv(&p(Table::Tokens), &header(Table::Tokens), ds.tokens.iter().map(token_fields))?;
    write_csv(
        &p(Table::TokenTransactions),
        &header(Table::TokenTransactions),
        ds.token_transactions.iter().map(token_tx_fields),
    )?;
    write_csv(
        &p(Table::Withdrawals),
        &header(Table::Withdrawals),
        ds.withdrawals.iter().map(withdrawal_fields),
    )?;
    let as_of = ds.final_balances.as_of_block;
    write_csv(
        &dir.join(BALANCES_FILE),
        &BALANCE_COLUMNS,
        ds.final_balances
            .balances
            .iter()
            .map(|(a, w)| vec![a.to_string(), w.to_string(), as_of.to_string()]),
    )?;

    let manifest = ExportManifest {
        row_counts: ds.row_counts().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        block_range: ds.block_range(),
        as_of_block: as_of,
        balance_rows: ds.final_balances.balances.len(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Cursor over one CSV record that turns field errors into located
/// [`ExportError::Malformed`] values.
struct Fields<'a> {
    file: &'a str,
    line: u64,
    header: &'a [&'static str],
    record: &'a csv::StringRecord,
}

impl Fields<'_> {
    fn err(&self, i: usize, message: impl ToString) -> ExportError {
        ExportError::Malformed {
            file: self.file.to_string(),
            line: self.line,
            column: self.header[i].to_string(),
            message: message.to_string(),
        }
    }

    fn raw(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or("")
    }

    fn nullable<T>(&self, i: usize, f: impl Fn(&str) -> Result<T, ExportError>) -> Result<Option<T>, ExportError> {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            f(self.raw(i)).map(Some)
        }
    }

    fn required(&self, i: usize) -> Result<&str, ExportError> {
        let v = self.raw(i);
        if v.is_empty() {
            Err(self.err(i, "null in non-nullable column"))
        } else {
            Ok(v)
        }
    }

    fn hash(&self, i: usize) -> Result<HashId, ExportError> {
        HashId::from_hex(self.required(i)?).map_err(|e| self.err(i, e))
    }

    fn opt_hash(&self, i: usize) -> Result<Option<HashId>, ExportError> {
        self.nullable(i, |s| HashId::from_hex(s).map_err(|e| self.err(i, e)))
    }

    fn address(&self, i: usize) -> Result<AccountAddress, ExportError> {
        AccountAddress::from_hex(self.required(i)?).map_err(|e| self.err(i, e))
    }

    fn opt_address(&self, i: usize) -> Result<Option<AccountAddress>, ExportError> {
        self.nullable(i, |s| AccountAddress::from_hex(s).map_err(|e| self.err(i, e)))
    }

    fn bytes(&self, i: usize) -> Result<ByteString, ExportError> {
        ByteString::from_hex(self.required(i)?).map_err(|e| self.err(i, e))
    }

    fn u64(&self, i: usize) -> Result<u64, ExportError> {
        let s = self.required(i)?;
        if !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(i, format!("not a plain decimal integer: {s:?}")));
        }
        s.parse().map_err(|e| self.err(i, e))
    }

    fn opt_u32(&self, i: usize) -> Result<Option<u32>, ExportError> {
        self.nullable(i, |s| {
            if !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(self.err(i, format!("not a plain decimal integer: {s:?}")));
            }
            s.parse().map_err(|e| self.err(i, e))
        })
    }

    fn u256(&self, i: usize) -> Result<U256, ExportError> {
        parse_u256(self.raw(i)).map_err(|e| self.err(i, e))
    }

    fn wei(&self, i: usize) -> Result<Wei, ExportError> {
        self.u256(i).map(Wei)
    }

    fn opt_wei(&self, i: usize) -> Result<Option<Wei>, ExportError> {
        self.nullable(i, |s| parse_u256(s).map(Wei).map_err(|e| self.err(i, e)))
    }

    fn bool(&self, i: usize) -> Result<bool, ExportError> {
        match self.required(i)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(i, format!("expected true/false, got {other:?}"))),
        }
    }

    fn sighashes(&self, i: usize) -> Result<Vec<Sighash>, ExportError> {
        let s = self.raw(i);
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split('|')
            .map(|h| Sighash::from_hex(h).map_err(|e| self.err(i, e)))
            .collect()
    }

    fn text(&self, i: usize) -> String {
        self.raw(i).to_string()
    }
}

fn read_csv<T>(
    dir: &Path,
    file: &str,
    table_name: &str,
    header: &[&'static str],
    mut parse: impl FnMut(&Fields<'_>) -> Result<T, ExportError>,
) -> Result<Vec<T>, ExportError> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(ExportError::MissingTable {
            table: table_name.to_string(),
            path,
        });
    }
    let f = File::open(&path).map_err(io_err(&path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(io::BufReader::new(f));
    let got = r.headers().map_err(|e| ExportError::Header {
        file: file.to_string(),
        message: e.to_string(),
    })?;
    if got.iter().ne(header.iter().copied()) {
        return Err(ExportError::Header {
            file: file.to_string(),
            message: format!("expected columns {header:?}, got {:?}", got.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = r.read_record(&mut record).map_err(|e| ExportError::Malformed {
            file: file.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            column: String::new(),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let fields = Fields {
            file,
            line,
            header,
            record: &record,
        };
        out.push(parse(&fields)?);
    }
    Ok(out)
}

/// Reads a directory written by [`write_export`] (or produced by an external
/// extraction in the same format).
pub fn read_export(dir: &Path) -> Result<RawDataset, ExportError> {
    let h = |t: Table| header(t);
    let mut ds = ChainDataset::default();
    let read = |t: Table| (table_file(t), t.name(), h(t));

    let (file, name, hd) = read(Table::Blocks);
    ds.blocks = read_csv(dir, &file, name, &hd, |f| {
        Ok(Block {
            hash: f.hash(0)?,
            number: f.u64(1)?,
            timestamp: f.u64(2)?,
            extra_data: f.bytes(3)?,
            base_fee_per_gas: f.wei(4)?,
            size: f.u64(5)?,
            miner: f.address(6)?,
        })
    })?;
    let (file, name, hd) = read(Table::Addresses);
    ds.addresses = read_csv(dir, &file, name, &hd, |f| {
        Ok(AddressRow {
            address: f.address(0)?,
            eth_balance: f.wei(1)?,
        })
    })?;
    let (file, name, hd) = read(Table::Transactions);
    ds.transactions = read_csv(dir, &file, name, &hd, |f| {
        let ty = f.u64(9)?;
        Ok(Transaction {
            hash: f.hash(0)?,
            transaction_index: f.u64(1)?,
            value: f.wei(2)?,
            from_address: f.address(3)?,
            to_address: f.opt_address(4)?,
            gas: f.u64(5)?,
            max_priority_fee_per_gas: f.opt_wei(6)?,
            input: f.bytes(7)?,
            block_hash: f.hash(8)?,
            transaction_type: u8::try_from(ty).map_err(|_| f.err(9, format!("transaction type {ty} out of range")))?,
            nonce: f.u64(10)?,
        })
    })?;
    let (file, name, hd) = read(Table::Contracts);
    ds.contracts = read_csv(dir, &file, name, &hd, |f| {
        Ok(Contract {
            address: f.address(0)?,
            version: f.u64(1)?,
            function_sighashes: f.sighashes(2)?,
            bytecode: f.bytes(3)?,
            is_erc20: f.bool(4)?,
            is_erc721: f.bool(5)?,
            block_hash: f.opt_hash(6)?,
        })
    })?;
    let (file, name, hd) = read(Table::Tokens);
    ds.tokens = read_csv(dir, &file, name, &hd, |f| {
        Ok(Token {
            address: f.address(0)?,
            symbol: f.text(1),
            name: f.text(2),
            decimals: f.opt_u32(3)?,
            total_supply: f.u256(4)?,
            block_hash: f.opt_hash(5)?,
        })
    })?;
    let (file, name, hd) = read(Table::TokenTransactions);
    ds.token_transactions = read_csv(dir, &file, name, &hd, |f| {
        Ok(TokenTransaction {
            transaction_hash: f.hash(0)?,
            log_index: f.u64(1)?,
            token_address: f.address(2)?,
            value: f.u256(3)?,
        })
    })?;
    let (file, name, hd) = read(Table::Withdrawals);
    ds.withdrawals = read_csv(dir, &file, name, &hd, |f| {
        Ok(Withdrawal {
            hash: f.hash(0)?,
            withdrawal_index: f.u64(1)?,
            validator: f.u64(2)?,
            address: f.address(3)?,
            amount: f.wei(4)?,
        })
    })?;

    let rows = read_csv(dir, BALANCES_FILE, "balances", &BALANCE_COLUMNS, |f| {
        Ok((f.address(0)?, f.wei(1)?, f.u64(2)?, f.line))
    })?;
    let mut snapshot = BalanceSnapshot::default();
    match rows.first() {
        Some(first) => snapshot.as_of_block = first.2,
        None => {
            let mpath = dir.join(MANIFEST_FILE);
            if let Ok(text) = fs::read_to_string(&mpath) {
                if let Ok(m) = serde_json::from_str::<ExportManifest>(&text) {
                    snapshot.as_of_block = m.as_of_block;
                }
            }
        }
    }
    for (address, balance, as_of, line) in rows {
        if as_of != snapshot.as_of_block {
            return Err(ExportError::Malformed {
                file: BALANCES_FILE.to_string(),
                line,
                column: "as_of_block".into(),
                message: format!("snapshot mixes blocks {} and {as_of}", snapshot.as_of_block),
            });
        }
        snapshot.balances.insert(address, balance);
    }
    ds.final_balances = snapshot;
    Ok(RawDataset { dataset: ds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn empty_dataset_writes_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_export(&ChainDataset::default(), dir.path()).unwrap();
        assert!(m.row_counts.values().all(|&n| n == 0));
        assert_eq!(m.block_range, None);
        let blocks = fs::read_to_string(dir.path().join("blocks.csv")).unwrap();
        assert_eq!(blocks, "hash,number,timestamp,extra_data,base_fee_per_gas,size,miner\n");
        let bal = fs::read_to_string(dir.path().join("balances.csv")).unwrap();
        assert_eq!(bal, "address,eth_balance,as_of_block\n");
        assert_eq!(read_export(dir.path()).unwrap().dataset, ChainDataset::default());
    }

    #[test]
    fn synthetic_export_round_trips() {
        let ds = generate(&SynthConfig {
            seed: 4,
            n_blocks: 10,
            mean_tx_per_block: 25.0,
            address_pool: 150,
            n_tokens: 30,
            ..SynthConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_export(&ds, dir.path()).unwrap();
        assert_eq!(m.row_counts["transactions"], ds.transactions.len());
        assert_eq!(m.row_counts["blocks"], 10);
        assert_eq!(m.block_range, ds.block_range());
        let back = read_export(dir.path()).unwrap();
        assert_eq!(back.dataset, ds);
    }

    #[test]
    fn missing_blocks_file_names_table() {
        let dir = tempfile::tempdir().unwrap();
        write_export(&ChainDataset::default(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("blocks.csv")).unwrap();
        let err = read_export(dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("table blocks: file not found"), "{err}");
    }

    #[test]
    fn scientific_notation_is_rejected_with_location() {
        let dir = tempfile::tempdir().unwrap();
        write_export(&ChainDataset::default(), dir.path()).unwrap();
        let a = AccountAddress([1; 20]);
        fs::write(
            dir.path().join("addresses.csv"),
            format!("address,eth_balance\n{a},5\n{a},1e18\n"),
        )
        .unwrap();
        match read_export(dir.path()).unwrap_err() {
            ExportError::Malformed { file, line, column, .. } => {
                assert_eq!(file, "addresses.csv");
                assert_eq!(line, 3);
                assert_eq!(column, "eth_balance");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn quoted_text_survives() {
        let mut ds = ChainDataset::default();
        let a = AccountAddress([9; 20]);
        ds.addresses.push(AddressRow {
            address: a,
            eth_balance: Wei::ZERO,
        });
        ds.tokens.push(Token {
            address: a,
            symbol: "A,B".into(),
            name: "say \"hi\"\nthere".into(),
            decimals: None,
            total_supply: U256::from(5u64),
            block_hash: None,
        });
        let dir = tempfile::tempdir().unwrap();
        write_export(&ds, dir.path()).unwrap();
        assert_eq!(read_export(dir.path()).unwrap().dataset, ds);
    }
}
