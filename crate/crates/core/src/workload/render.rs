use std::fmt::Write as _;
use std::str::FromStr;

use super::ops::{Batch, Mutation};
use crate::chain_model::{encode_hex, Datum, Row, RowKey, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    #[default]
    Postgres,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unsupported SQL dialect {0:?} (supported: postgres)")]
pub struct UnknownDialect(pub String);

impl FromStr for Dialect {
    type Err = UnknownDialect;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "postgres" => Ok(Dialect::Postgres),
            other => Err(UnknownDialect(other.to_string())),
        }
    }
}

impl Dialect {
    pub fn tag(self) -> &'static str {
        match self {
            Dialect::Postgres => "postgres",
        }
    }
}

fn bytes_literal(out: &mut String, b: &[u8]) {
    let hex = encode_hex(b);
    let _ = write!(out, "'\\x{}'::bytea", &hex[2..]);
}

fn text_literal(out: &mut String, s: &str) {
    out.push('\'');
    for c in s.chars() {
        if c == '\'' {
            out.push('\'');
        }
        out.push(c);
    }
    out.push('\'');
}

fn value_literal(out: &mut String, v: Value<'_>) {
    match v {
        Value::Null => out.push_str("NULL"),
        Value::Bool(true) => out.push_str("TRUE"),
        Value::Bool(false) => out.push_str("FALSE"),
        Value::Uint(u) => {
            let _ = write!(out, "{u}");
        }
        Value::Text(s) => text_literal(out, s),
        Value::Bytes(b) => bytes_literal(out, b),
        Value::Sighashes([]) => out.push_str("'{}'::bytea[]"),
        Value::Sighashes(s) => {
            out.push_str("ARRAY[");
            for (i, h) in s.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                bytes_literal(out, &h.0);
            }
            out.push_str("]::bytea[]");
        }
    }
}

fn key_predicate(out: &mut String, key: &RowKey) {
    let table = key.table();
    for (i, (col, v)) in table.primary_key().iter().zip(key.values()).enumerate() {
        if i > 0 {
            out.push_str(" AND ");
        }
        let _ = write!(out, "{col} = ");
        value_literal(out, v.as_value());
    }
}

fn insert(out: &mut String, row: &Row) {
    let table = row.table();
    let cols = table.columns();
    let _ = write!(out, "INSERT INTO {} (", table.name());
    for (i, c) in cols.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(c.name);
    }
    out.push_str(") VALUES (");
    for i in 0..cols.len() {
        if i > 0 {
            out.push_str(", ");
        }
        value_literal(out, row.value(i));
    }
    out.push_str(");");
}

/// Renders one mutation as a single semicolon-terminated statement.
pub fn render_mutation(m: &Mutation, _dialect: Dialect) -> String {
    let mut out = String::new();
    match m {
        Mutation::Insert(row) => insert(&mut out, row),
        Mutation::UpdateBalance { address, delta } => {
            let sign = if delta.is_negative() { '-' } else { '+' };
            let _ = write!(
                out,
                "UPDATE addresses SET eth_balance = eth_balance {sign} {} WHERE ",
                delta.magnitude()
            );
            key_predicate(&mut out, &RowKey::Addresses { address: *address });
            out.push(';');
        }
        Mutation::Delete(key) => {
            let _ = write!(out, "DELETE FROM {} WHERE ", key.table().name());
            key_predicate(&mut out, key);
            out.push(';');
        }
        Mutation::NullBlockHash(key) => {
            let _ = write!(out, "UPDATE {} SET block_hash = NULL WHERE ", key.table().name());
            key_predicate(&mut out, key);
            out.push(';');
        }
    }
    out
}

/// Renders a batch as one transaction: one statement per mutation, in order.
pub fn render_sql(batch: &Batch, dialect: Dialect) -> String {
    let mut out = String::from("BEGIN;\n");
    for m in &batch.ops {
        out.push_str(&render_mutation(m, dialect));
        out.push('\n');
    }
    out.push_str("COMMIT;\n");
    out
}

/// Literal form of a datum, as used in rendered statements.
pub fn datum_literal(d: &Datum, _dialect: Dialect) -> String {
    let mut out = String::new();
    value_literal(&mut out, d.as_value());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::{AccountAddress, ByteString, Contract, SignedWei, Sighash, Token, Wei, U256};
    use crate::workload::ops::BatchKind;

    fn batch(ops: Vec<Mutation>) -> Batch {
        Batch {
            kind: BatchKind::Upsert,
            index: 1,
            block_range: (1, 1),
            ops,
        }
    }

    #[test]
    fn empty_batch_is_bare_transaction() {
        assert_eq!(render_sql(&batch(vec![]), Dialect::Postgres), "BEGIN;\nCOMMIT;\n");
    }

    #[test]
    fn unknown_dialect_rejected() {
        assert_eq!("mysql".parse::<Dialect>(), Err(UnknownDialect("mysql".into())));
        assert_eq!("postgres".parse::<Dialect>(), Ok(Dialect::Postgres));
    }

    #[test]
    fn balance_update_adds_signed_delta() {
        let a = AccountAddress([0xab; 20]);
        let up = Mutation::UpdateBalance {
            address: a,
            delta: SignedWei::positive(Wei::from_u64(42)),
        };
        assert_eq!(
            render_mutation(&up, Dialect::Postgres),
            format!("UPDATE addresses SET eth_balance = eth_balance + 42 WHERE address = '\\x{}'::bytea;", "ab".repeat(20))
        );
        let down = Mutation::UpdateBalance {
            address: a,
            delta: SignedWei::negative(Wei::from_u64(7)),
        };
        assert!(render_mutation(&down, Dialect::Postgres).contains("eth_balance - 7 WHERE"));
    }

    #[test]
    fn insert_renders_every_column_kind() {
        let a = AccountAddress([1; 20]);
        let ins = Mutation::Insert(Row::Tokens(Token {
            address: a,
            symbol: "O'K".into(),
            name: "x".into(),
            decimals: None,
            total_supply: U256::from(10u64).pow(U256::from(30u64)),
            block_hash: None,
        }));
        let sql = render_mutation(&ins, Dialect::Postgres);
        assert_eq!(
            sql,
            format!(
                "INSERT INTO tokens (address, symbol, name, decimals, total_supply, block_hash) VALUES ('\\x{}'::bytea, 'O''K', 'x', NULL, 1{}, NULL);",
                "01".repeat(20),
                "0".repeat(30)
            )
        );
        let c = Mutation::Insert(Row::Contracts(Contract {
            address: a,
            version: 1,
            function_sighashes: vec![Sighash([0xa9, 0x05, 0x9c, 0xbb])],
            bytecode: ByteString(vec![]),
            is_erc20: true,
            is_erc721: false,
            block_hash: None,
        }));
        let sql = render_mutation(&c, Dialect::Postgres);
        assert!(sql.contains("ARRAY['\\xa9059cbb'::bytea]::bytea[], '\\x'::bytea, TRUE, FALSE, NULL"), "{sql}");
    }

    #[test]
    fn delete_uses_full_primary_key() {
        let k = RowKey::Contracts {
            address: AccountAddress([2; 20]),
            version: 3,
        };
        let sql = render_mutation(&Mutation::Delete(k), Dialect::Postgres);
        assert!(sql.starts_with("DELETE FROM contracts WHERE address = "));
        assert!(sql.ends_with(" AND version = 3;"));
        let sql = render_mutation(&Mutation::NullBlockHash(k), Dialect::Postgres);
        assert!(sql.starts_with("UPDATE contracts SET block_hash = NULL WHERE address = "));
    }
}
