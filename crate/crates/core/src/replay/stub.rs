//! Scripted SQL engine: parses the statement subset that workload files
//! and simple counting queries use, and keeps tables as row multisets.
//! It shares no code with the renderer so that it can check it.

use std::collections::BTreeMap;

use super::executor::{ExecError, SqlExecutor, SqlExecutorCaps};
use crate::chain_model::{Value, U256};

/// A stored SQL value. Byte arrays are kept as lists of byte strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SqlValue {
    Null,
    Bool(bool),
    Num(U256),
    Text(String),
    Bytes(Vec<u8>),
    Array(Vec<Vec<u8>>),
}

impl SqlValue {
    pub fn from_value(v: Value<'_>) -> Self {
        match v {
            Value::Null => SqlValue::Null,
            Value::Bool(b) => SqlValue::Bool(b),
            Value::Uint(u) => SqlValue::Num(u),
            Value::Text(s) => SqlValue::Text(s.to_string()),
            Value::Bytes(b) => SqlValue::Bytes(b.to_vec()),
            Value::Sighashes(s) => SqlValue::Array(s.iter().map(|h| h.0.to_vec()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(String),
    Str(String),
    Sym(&'static str),
}

const SYMS: &[&str] = &["::", "<=", ">=", "<>", "!=", "(", ")", ",", ";", "*", "=", "<", ">", "[", "]", ".", "+", "-", "/", "%"];

fn lex(sql: &str) -> Result<Vec<Tok>, String> {
    let b = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if sql[i..].starts_with("--") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Word(sql[s..i].to_string()));
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            out.push(Tok::Num(sql[s..i].to_string()));
        } else if c == b'\'' {
            let mut s = String::new();
            i += 1;
            loop {
                let Some(ch) = sql[i..].chars().next() else {
                    return Err("unterminated string literal".into());
                };
                i += ch.len_utf8();
                if ch == '\'' {
                    if b.get(i) == Some(&b'\'') {
                        s.push('\'');
                        i += 1;
                    } else {
                        break;
                    }
                } else {
                    s.push(ch);
                }
            }
            out.push(Tok::Str(s));
        } else if let Some(sym) = SYMS.iter().find(|s| sql[i..].starts_with(**s)) {
            out.push(Tok::Sym(sym));
            i += sym.len();
        } else {
            return Err(format!("unexpected character {:?}", sql[i..].chars().next().unwrap_or('?')));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Operand {
    Column(Option<String>, String),
    Lit(SqlValue),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone)]
enum Cond {
    Cmp(Operand, CmpOp, Operand),
    Between(Operand, SqlValue, SqlValue),
    Like(Operand, String, bool),
    IsNull(Operand, bool),
}

#[derive(Debug, Clone)]
enum SetExpr {
    Value(Operand),
    Arith(Operand, bool, SqlValue),
}

#[derive(Debug, Clone)]
enum Stmt {
    Begin,
    Commit,
    Rollback,
    Ignored,
    CreateTable { name: String, columns: Vec<String>, pk: Vec<String> },
    Insert { table: String, columns: Vec<String>, values: Vec<SqlValue> },
    Update { table: String, sets: Vec<(String, SetExpr)>, conds: Vec<Cond> },
    Delete { table: String, conds: Vec<Cond> },
    Count { from: Vec<(String, String)>, conds: Vec<Cond> },
}

struct Parser<'a> {
    toks: &'a [Tok],
    i: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.i)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.i + k)
    }

    fn next(&mut self) -> Result<&'a Tok, String> {
        let t = self.toks.get(self.i).ok_or("unexpected end of statement")?;
        self.i += 1;
        Ok(t)
    }

    fn kw(&mut self, k: &str) -> bool {
        match self.peek() {
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case(k) => {
                self.i += 1;
                true
            }
            _ => false,
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), String> {
        if self.kw(k) {
            Ok(())
        } else {
            Err(format!("expected {k}, found {:?}", self.peek()))
        }
    }

    fn sym(&mut self, s: &str) -> bool {
        match self.peek() {
            Some(Tok::Sym(x)) if *x == s => {
                self.i += 1;
                true
            }
            _ => false,
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), String> {
        if self.sym(s) {
            Ok(())
        } else {
            Err(format!("expected {s:?}, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        match self.next()? {
            Tok::Word(w) => Ok(w.to_ascii_lowercase()),
            t => Err(format!("expected identifier, found {t:?}")),
        }
    }

    fn done(&self) -> Result<(), String> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(format!("unexpected trailing token {t:?}")),
        }
    }

    fn cast_suffix(&mut self) -> Result<Option<(String, bool)>, String> {
        if !self.sym("::") {
            return Ok(None);
        }
        let ty = self.ident()?;
        let array = if self.sym("[") {
            self.expect_sym("]")?;
            true
        } else {
            false
        };
        Ok(Some((ty, array)))
    }

    fn literal(&mut self) -> Result<SqlValue, String> {
        match self.next()? {
            Tok::Word(w) if w.eq_ignore_ascii_case("null") => Ok(SqlValue::Null),
            Tok::Word(w) if w.eq_ignore_ascii_case("true") => Ok(SqlValue::Bool(true)),
            Tok::Word(w) if w.eq_ignore_ascii_case("false") => Ok(SqlValue::Bool(false)),
            Tok::Word(w) if w.eq_ignore_ascii_case("array") => {
                self.expect_sym("[")?;
                let mut items = Vec::new();
                loop {
                    match self.literal()? {
                        SqlValue::Bytes(b) => items.push(b),
                        v => return Err(format!("array element must be bytea, got {v:?}")),
                    }
                    if !self.sym(",") {
                        break;
                    }
                }
                self.expect_sym("]")?;
                match self.cast_suffix()? {
                    Some((t, true)) if t == "bytea" => Ok(SqlValue::Array(items)),
                    other => Err(format!("unsupported array cast {other:?}")),
                }
            }
            Tok::Num(n) => U256::from_dec_str(n)
                .map(SqlValue::Num)
                .map_err(|_| format!("unsupported numeric literal {n}")),
            Tok::Str(s) => match self.cast_suffix()? {
                None => Ok(SqlValue::Text(s.clone())),
                Some((t, false)) if t == "bytea" => decode_bytea(s).map(SqlValue::Bytes),
                Some((t, true)) if t == "bytea" && s == "{}" => Ok(SqlValue::Array(Vec::new())),
                Some(other) => Err(format!("unsupported cast {other:?}")),
            },
            t => Err(format!("expected literal, found {t:?}")),
        }
    }

    fn operand(&mut self) -> Result<Operand, String> {
        match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Word(w)), _) if ["null", "true", "false", "array"].iter().any(|k| w.eq_ignore_ascii_case(k)) => {
                Ok(Operand::Lit(self.literal()?))
            }
            (Some(Tok::Word(_)), Some(Tok::Sym("."))) => {
                let a = self.ident()?;
                self.i += 1;
                Ok(Operand::Column(Some(a), self.ident()?))
            }
            (Some(Tok::Word(_)), _) => Ok(Operand::Column(None, self.ident()?)),
            _ => Ok(Operand::Lit(self.literal()?)),
        }
    }

    fn cond(&mut self) -> Result<Cond, String> {
        let lhs = self.operand()?;
        if self.kw("between") {
            let lo = self.literal()?;
            self.expect_kw("and")?;
            let hi = self.literal()?;
            return Ok(Cond::Between(lhs, lo, hi));
        }
        if self.kw("is") {
            let negated = self.kw("not");
            self.expect_kw("null")?;
            return Ok(Cond::IsNull(lhs, negated));
        }
        let negated = self.kw("not");
        if self.kw("like") {
            match self.next()? {
                Tok::Str(p) => return Ok(Cond::Like(lhs, p.clone(), negated)),
                t => return Err(format!("LIKE expects a string pattern, found {t:?}")),
            }
        }
        if negated {
            return Err("expected LIKE after NOT".into());
        }
        let op = match self.next()? {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("<>") | Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            t => return Err(format!("expected comparison operator, found {t:?}")),
        };
        Ok(Cond::Cmp(lhs, op, self.operand()?))
    }

    fn where_clause(&mut self) -> Result<Vec<Cond>, String> {
        let mut conds = Vec::new();
        if self.kw("where") {
            loop {
                conds.push(self.cond()?);
                if !self.kw("and") {
                    break;
                }
            }
        }
        Ok(conds)
    }

    fn ident_list(&mut self) -> Result<Vec<String>, String> {
        self.expect_sym("(")?;
        let mut out = vec![self.ident()?];
        while self.sym(",") {
            out.push(self.ident()?);
        }
        self.expect_sym(")")?;
        Ok(out)
    }

    fn create_table(&mut self) -> Result<Stmt, String> {
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut columns = Vec::new();
        let mut pk = Vec::new();
        loop {
            if self.kw("primary") {
                self.expect_kw("key")?;
                pk = self.ident_list()?;
            } else if ["unique", "check", "foreign", "constraint"].iter().any(|k| self.kw(k)) {
                let mut depth = 0usize;
                while let Some(t) = self.peek() {
                    match t {
                        Tok::Sym(",") | Tok::Sym(")") if depth == 0 => break,
                        Tok::Sym("(") => depth += 1,
                        Tok::Sym(")") => depth -= 1,
                        _ => {}
                    }
                    self.i += 1;
                }
            } else {
                let col = self.ident()?;
                let mut depth = 0usize;
                while let Some(t) = self.peek() {
                    match t {
                        Tok::Sym(",") | Tok::Sym(")") if depth == 0 => break,
                        Tok::Sym("(") => depth += 1,
                        Tok::Sym(")") => depth -= 1,
                        Tok::Word(w) if depth == 0 && w.eq_ignore_ascii_case("primary") => pk = vec![col.clone()],
                        _ => {}
                    }
                    self.i += 1;
                }
                columns.push(col);
            }
            if !self.sym(",") {
                break;
            }
        }
        self.expect_sym(")")?;
        self.done()?;
        Ok(Stmt::CreateTable { name, columns, pk })
    }

    fn statement(&mut self) -> Result<Stmt, String> {
        let s = if self.kw("begin") {
            Stmt::Begin
        } else if self.kw("commit") {
            Stmt::Commit
        } else if self.kw("rollback") {
            Stmt::Rollback
        } else if self.kw("analyze") {
            self.i = self.toks.len();
            Stmt::Ignored
        } else if self.kw("create") {
            if self.kw("table") {
                return self.create_table();
            }
            self.i = self.toks.len();
            Stmt::Ignored
        } else if self.kw("insert") {
            self.expect_kw("into")?;
            let table = self.ident()?;
            let columns = self.ident_list()?;
            self.expect_kw("values")?;
            self.expect_sym("(")?;
            let mut values = vec![self.literal()?];
            while self.sym(",") {
                values.push(self.literal()?);
            }
            self.expect_sym(")")?;
            if values.len() != columns.len() {
                return Err(format!("{} columns but {} values", columns.len(), values.len()));
            }
            Stmt::Insert { table, columns, values }
        } else if self.kw("update") {
            let table = self.ident()?;
            self.expect_kw("set")?;
            let mut sets = Vec::new();
            loop {
                let col = self.ident()?;
                self.expect_sym("=")?;
                let base = self.operand()?;
                let expr = if self.sym("+") {
                    SetExpr::Arith(base, true, self.literal()?)
                } else if self.sym("-") {
                    SetExpr::Arith(base, false, self.literal()?)
                } else {
                    SetExpr::Value(base)
                };
                sets.push((col, expr));
                if !self.sym(",") {
                    break;
                }
            }
            let conds = self.where_clause()?;
            Stmt::Update { table, sets, conds }
        } else if self.kw("delete") {
            self.expect_kw("from")?;
            let table = self.ident()?;
            let conds = self.where_clause()?;
            Stmt::Delete { table, conds }
        } else if self.kw("select") {
            self.expect_kw("count")?;
            self.expect_sym("(")?;
            self.expect_sym("*")?;
            self.expect_sym(")")?;
            self.expect_kw("from")?;
            let mut from = Vec::new();
            loop {
                let t = self.ident()?;
                self.kw("as");
                let alias = match self.peek() {
                    Some(Tok::Word(w)) if !w.eq_ignore_ascii_case("where") => self.ident()?,
                    _ => t.clone(),
                };
                from.push((alias, t));
                if !self.sym(",") {
                    break;
                }
            }
            let conds = self.where_clause()?;
            Stmt::Count { from, conds }
        } else {
            return Err(format!("unsupported statement starting with {:?}", self.peek()));
        };
        self.done()?;
        Ok(s)
    }
}

fn decode_bytea(s: &str) -> Result<Vec<u8>, String> {
    let hex = s.strip_prefix("\\x").ok_or_else(|| format!("bytea literal without \\x prefix: {s:?}"))?;
    if hex.len() % 2 != 0 {
        return Err(format!("odd-length bytea literal: {s:?}"));
    }
    (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad hex in bytea literal: {s:?}")))
        .collect()
}

fn like(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    // reachable[j]: pattern prefix of length j matches the text consumed so far.
    let mut reachable = vec![false; p.len() + 1];
    reachable[0] = true;
    for j in 0..p.len() {
        if p[j] == '%' && reachable[j] {
            reachable[j + 1] = true;
        }
    }
    for &c in &t {
        let mut next = vec![false; p.len() + 1];
        for j in 0..p.len() {
            if !reachable[j] {
                continue;
            }
            match p[j] {
                '%' => next[j] = true,
                '_' => next[j + 1] = true,
                pc if pc == c => next[j + 1] = true,
                _ => {}
            }
        }
        for j in 0..p.len() {
            if p[j] == '%' && next[j] {
                next[j + 1] = true;
            }
        }
        reachable = next;
    }
    reachable[p.len()]
}

fn compare(a: &SqlValue, op: CmpOp, b: &SqlValue) -> Result<bool, String> {
    use std::cmp::Ordering::*;
    let ord = match (a, b) {
        (SqlValue::Null, _) | (_, SqlValue::Null) => return Ok(false),
        (SqlValue::Num(x), SqlValue::Num(y)) => x.cmp(y),
        (SqlValue::Bool(x), SqlValue::Bool(y)) => x.cmp(y),
        (SqlValue::Text(x), SqlValue::Text(y)) => x.cmp(y),
        (SqlValue::Bytes(x), SqlValue::Bytes(y)) => x.cmp(y),
        (SqlValue::Array(x), SqlValue::Array(y)) => x.cmp(y),
        _ => return Err(format!("cannot compare {a:?} with {b:?}")),
    };
    Ok(match op {
        CmpOp::Eq => ord == Equal,
        CmpOp::Ne => ord != Equal,
        CmpOp::Lt => ord == Less,
        CmpOp::Le => ord != Greater,
        CmpOp::Gt => ord == Greater,
        CmpOp::Ge => ord != Less,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
struct StubTable {
    columns: Vec<String>,
    pk: Vec<usize>,
    /// Keyed by primary-key values.
    rows: BTreeMap<Vec<SqlValue>, Vec<SqlValue>>,
}

impl StubTable {
    fn col(&self, table: &str, name: &str) -> Result<usize, String> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| format!("column {table}.{name} does not exist"))
    }

    fn key(&self, row: &[SqlValue]) -> Vec<SqlValue> {
        self.pk.iter().map(|&i| row[i].clone()).collect()
    }
}

/// Single-table condition resolved to column positions.
enum RowCond {
    Cmp(usize, CmpOp, SqlValue),
    Between(usize, SqlValue, SqlValue),
    Like(usize, String, bool),
    IsNull(usize, bool),
}

impl RowCond {
    fn eval(&self, row: &[SqlValue]) -> Result<bool, String> {
        match self {
            RowCond::Cmp(c, op, v) => compare(&row[*c], *op, v),
            RowCond::Between(c, lo, hi) => Ok(compare(&row[*c], CmpOp::Ge, lo)? && compare(&row[*c], CmpOp::Le, hi)?),
            RowCond::Like(c, p, neg) => match &row[*c] {
                SqlValue::Null => Ok(false),
                SqlValue::Text(t) => Ok(like(t, p) != *neg),
                v => Err(format!("LIKE on non-text value {v:?}")),
            },
            RowCond::IsNull(c, neg) => Ok(matches!(row[*c], SqlValue::Null) != *neg),
        }
    }
}

/// In-memory SQL engine over the statement subset emitted by workload
/// files. With `strict` set, UPDATE and DELETE statements that match no
/// row fail instead of succeeding silently.
#[derive(Debug, Clone, Default)]
pub struct SqlStub {
    tables: BTreeMap<String, StubTable>,
    in_txn: Option<BTreeMap<String, StubTable>>,
    pub strict: bool,
    pub statements_executed: usize,
}

impl SqlStub {
    pub fn new() -> Self {
        SqlStub {
            strict: true,
            ..SqlStub::default()
        }
    }

    /// Column names of `table` in declaration order.
    pub fn columns(&self, table: &str) -> Option<&[String]> {
        self.tables.get(table).map(|t| t.columns.as_slice())
    }

    /// Rows of `table` as a sorted multiset.
    pub fn rows(&self, table: &str) -> Vec<Vec<SqlValue>> {
        let mut rows: Vec<Vec<SqlValue>> = self.tables.get(table).map(|t| t.rows.values().cloned().collect()).unwrap_or_default();
        rows.sort();
        rows
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    fn table_mut(&mut self, name: &str) -> Result<&mut StubTable, String> {
        self.tables.get_mut(name).ok_or_else(|| format!("relation {name} does not exist"))
    }

    fn row_conds(t: &StubTable, table: &str, conds: &[Cond]) -> Result<Vec<RowCond>, String> {
        let col = |o: &Operand| -> Result<usize, String> {
            match o {
                Operand::Column(None, c) => t.col(table, c),
                Operand::Column(Some(a), c) if a == table => t.col(table, c),
                other => Err(format!("unsupported operand {other:?}")),
            }
        };
        conds
            .iter()
            .map(|c| match c {
                Cond::Cmp(l, op, Operand::Lit(v)) => Ok(RowCond::Cmp(col(l)?, *op, v.clone())),
                Cond::Between(l, lo, hi) => Ok(RowCond::Between(col(l)?, lo.clone(), hi.clone())),
                Cond::Like(l, p, n) => Ok(RowCond::Like(col(l)?, p.clone(), *n)),
                Cond::IsNull(l, n) => Ok(RowCond::IsNull(col(l)?, *n)),
                other => Err(format!("unsupported condition {other:?}")),
            })
            .collect()
    }

    /// Keys of rows matching `conds`; an equality on every key column is a
    /// direct lookup.
    fn matching_keys(t: &StubTable, conds: &[RowCond]) -> Result<Vec<Vec<SqlValue>>, String> {
        let mut key: Vec<Option<SqlValue>> = vec![None; t.pk.len()];
        for c in conds {
            if let RowCond::Cmp(col, CmpOp::Eq, v) = c {
                if let Some(k) = t.pk.iter().position(|p| p == col) {
                    key[k] = Some(v.clone());
                }
            }
        }
        let mut out = Vec::new();
        if !t.pk.is_empty() && key.iter().all(Option::is_some) {
            let k: Vec<SqlValue> = key.into_iter().map(Option::unwrap).collect();
            if let Some(row) = t.rows.get(&k) {
                if conds.iter().try_fold(true, |acc, c| Ok::<_, String>(acc && c.eval(row)?))? {
                    out.push(k);
                }
            }
            return Ok(out);
        }
        for (k, row) in &t.rows {
            if conds.iter().try_fold(true, |acc, c| Ok::<_, String>(acc && c.eval(row)?))? {
                out.push(k.clone());
            }
        }
        Ok(out)
    }

    fn run(&mut self, stmt: Stmt) -> Result<Option<u64>, String> {
        match stmt {
            Stmt::Begin => {
                if self.in_txn.is_some() {
                    return Err("transaction already in progress".into());
                }
                self.in_txn = Some(self.tables.clone());
            }
            Stmt::Commit => {
                self.in_txn.take().ok_or("no transaction in progress")?;
            }
            Stmt::Rollback => {
                let saved = self.in_txn.take().ok_or("no transaction in progress")?;
                self.tables = saved;
            }
            Stmt::Ignored => {}
            Stmt::CreateTable { name, columns, pk } => {
                if self.tables.contains_key(&name) {
                    return Err(format!("relation {name} already exists"));
                }
                let mut t = StubTable {
                    columns,
                    ..StubTable::default()
                };
                t.pk = pk.iter().map(|c| t.col(&name, c)).collect::<Result<_, _>>()?;
                if t.pk.is_empty() {
                    return Err(format!("table {name} has no primary key"));
                }
                self.tables.insert(name, t);
            }
            Stmt::Insert { table, columns, values } => {
                let t = self.table_mut(&table)?;
                let mut row = vec![SqlValue::Null; t.columns.len()];
                for (c, v) in columns.iter().zip(values) {
                    row[t.col(&table, c)?] = v;
                }
                let key = t.key(&row);
                if key.contains(&SqlValue::Null) {
                    return Err(format!("null primary key value in {table}"));
                }
                if t.rows.contains_key(&key) {
                    return Err(format!("duplicate key value violates primary key of {table}"));
                }
                t.rows.insert(key, row);
            }
            Stmt::Update { table, sets, conds } => {
                let strict = self.strict;
                let t = self.table_mut(&table)?;
                let rc = Self::row_conds(t, &table, &conds)?;
                let keys = Self::matching_keys(t, &rc)?;
                if strict && keys.is_empty() {
                    return Err(format!("UPDATE on {table} matched no rows"));
                }
                let sets: Vec<(usize, SetExpr)> = sets
                    .into_iter()
                    .map(|(c, e)| Ok::<_, String>((t.col(&table, &c)?, e)))
                    .collect::<Result<_, _>>()?;
                if sets.iter().any(|(c, _)| t.pk.contains(c)) {
                    return Err("updating primary-key columns is not supported".into());
                }
                for k in keys {
                    let row = t.rows.get(&k).expect("matched key").clone();
                    let mut new = row.clone();
                    for (c, e) in &sets {
                        let operand = |o: &Operand| -> Result<SqlValue, String> {
                            match o {
                                Operand::Lit(v) => Ok(v.clone()),
                                Operand::Column(_, name) => Ok(row[t.col(&table, name)?].clone()),
                            }
                        };
                        new[*c] = match e {
                            SetExpr::Value(o) => operand(o)?,
                            SetExpr::Arith(o, add, rhs) => match (operand(o)?, rhs) {
                                (SqlValue::Num(a), SqlValue::Num(b)) => SqlValue::Num(if *add {
                                    a.checked_add(*b).ok_or("numeric overflow")?
                                } else {
                                    a.checked_sub(*b).ok_or_else(|| format!("{table}.{} would become negative", t.columns[*c]))?
                                }),
                                (a, b) => return Err(format!("arithmetic on {a:?} and {b:?}")),
                            },
                        };
                    }
                    t.rows.insert(k, new);
                }
            }
            Stmt::Delete { table, conds } => {
                let strict = self.strict;
                let t = self.table_mut(&table)?;
                let rc = Self::row_conds(t, &table, &conds)?;
                let keys = Self::matching_keys(t, &rc)?;
                if strict && keys.is_empty() {
                    return Err(format!("DELETE on {table} matched no rows"));
                }
                for k in keys {
                    t.rows.remove(&k);
                }
            }
            Stmt::Count { from, conds } => return self.count(&from, &conds).map(Some),
        }
        Ok(None)
    }

    /// Nested-loop evaluation in FROM order; each condition is checked as
    /// soon as all aliases it mentions are bound.
    fn count(&self, from: &[(String, String)], conds: &[Cond]) -> Result<u64, String> {
        let tables: Vec<&StubTable> = from
            .iter()
            .map(|(_, t)| self.tables.get(t).ok_or_else(|| format!("relation {t} does not exist")))
            .collect::<Result<_, _>>()?;
        let resolve = |o: &Operand| -> Result<Option<(usize, usize)>, String> {
            match o {
                Operand::Lit(_) => Ok(None),
                Operand::Column(Some(a), c) => {
                    let i = from.iter().position(|(x, _)| x == a).ok_or_else(|| format!("unknown alias {a}"))?;
                    Ok(Some((i, tables[i].col(&from[i].1, c)?)))
                }
                Operand::Column(None, c) => {
                    let hits: Vec<usize> = (0..from.len()).filter(|&i| tables[i].columns.contains(c)).collect();
                    match hits.as_slice() {
                        [i] => Ok(Some((*i, tables[*i].col(&from[*i].1, c)?))),
                        _ => Err(format!("column reference {c} is ambiguous or unknown")),
                    }
                }
            }
        };
        type Resolved = (Option<(usize, usize)>, Option<(usize, usize)>);
        let mut by_depth: Vec<Vec<(Resolved, &Cond)>> = vec![Vec::new(); from.len()];
        for c in conds {
            let (l, r) = match c {
                Cond::Cmp(l, _, r) => (resolve(l)?, resolve(r)?),
                Cond::Between(l, ..) | Cond::Like(l, ..) | Cond::IsNull(l, _) => (resolve(l)?, None),
            };
            let depth = l.map(|x| x.0).max(r.map(|x| x.0)).unwrap_or(0);
            by_depth[depth].push(((l, r), c));
        }
        let rows: Vec<Vec<&Vec<SqlValue>>> = tables.iter().map(|t| t.rows.values().collect()).collect();
        let mut bound: Vec<&Vec<SqlValue>> = Vec::with_capacity(from.len());
        fn value<'v>(bound: &[&'v Vec<SqlValue>], r: Option<(usize, usize)>, o: &'v Operand) -> &'v SqlValue {
            match (r, o) {
                (Some((i, c)), _) => &bound[i][c],
                (None, Operand::Lit(v)) => v,
                (None, Operand::Column(..)) => unreachable!("columns are resolved"),
            }
        }
        fn check(bound: &[&Vec<SqlValue>], ((l, r), c): &(Resolved, &Cond)) -> Result<bool, String> {
            match c {
                Cond::Cmp(lo, op, ro) => compare(value(bound, *l, lo), *op, value(bound, *r, ro)),
                Cond::Between(lo, a, b) => {
                    let v = value(bound, *l, lo);
                    Ok(compare(v, CmpOp::Ge, a)? && compare(v, CmpOp::Le, b)?)
                }
                Cond::Like(lo, p, neg) => match value(bound, *l, lo) {
                    SqlValue::Null => Ok(false),
                    SqlValue::Text(t) => Ok(like(t, p) != *neg),
                    v => Err(format!("LIKE on non-text value {v:?}")),
                },
                Cond::IsNull(lo, neg) => Ok(matches!(value(bound, *l, lo), SqlValue::Null) != *neg),
            }
        }
        fn go<'v>(
            depth: usize,
            rows: &[Vec<&'v Vec<SqlValue>>],
            by_depth: &[Vec<(Resolved, &Cond)>],
            bound: &mut Vec<&'v Vec<SqlValue>>,
        ) -> Result<u64, String> {
            if depth == rows.len() {
                return Ok(1);
            }
            let mut n = 0;
            for r in &rows[depth] {
                bound.push(r);
                let mut ok = true;
                for c in &by_depth[depth] {
                    if !check(bound, c)? {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    n += go(depth + 1, rows, by_depth, bound)?;
                }
                bound.pop();
            }
            Ok(n)
        }
        go(0, &rows, &by_depth, &mut bound)
    }

    /// Executes `sql`, returning the result of the last counting query.
    fn execute_all(&mut self, sql: &str) -> Result<Option<u64>, ExecError> {
        let toks = lex(sql).map_err(|m| ExecError::Statement { ordinal: 1, message: m })?;
        let mut last = None;
        let mut ordinal = 0;
        for stmt in toks.split(|t| *t == Tok::Sym(";")) {
            if stmt.is_empty() {
                continue;
            }
            ordinal += 1;
            let parsed = Parser { toks: stmt, i: 0 }.statement();
            let result = parsed.and_then(|s| self.run(s));
            match result {
                Ok(v) => {
                    self.statements_executed += 1;
                    if v.is_some() {
                        last = v;
                    }
                }
                Err(message) => {
                    if let Some(saved) = self.in_txn.take() {
                        self.tables = saved;
                    }
                    return Err(ExecError::Statement { ordinal, message });
                }
            }
        }
        Ok(last)
    }
}

impl SqlExecutor for SqlStub {
    fn caps(&self) -> SqlExecutorCaps {
        SqlExecutorCaps::default()
    }

    fn execute(&mut self, sql: &str) -> Result<(), ExecError> {
        self.execute_all(sql).map(drop)
    }

    fn query_count(&mut self, sql: &str) -> Result<u64, ExecError> {
        self.execute_all(sql)?
            .ok_or_else(|| ExecError::Other("query returned no count".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::CREATE_SQL;

    fn stub() -> SqlStub {
        let mut s = SqlStub::new();
        s.execute(CREATE_SQL).unwrap();
        s
    }

    #[test]
    fn ddl_declares_seven_tables_with_keys() {
        let s = stub();
        assert_eq!(s.table_names().count(), 7);
        assert_eq!(s.tables["contracts"].pk.len(), 2);
        assert_eq!(s.columns("addresses").unwrap(), ["address", "eth_balance"]);
        assert_eq!(s.columns("transactions").unwrap().len(), 11);
    }

    #[test]
    fn failed_statement_rolls_back_whole_transaction() {
        let mut s = stub();
        let sql = "BEGIN;\nINSERT INTO addresses (address, eth_balance) VALUES ('\\x01'::bytea, 5);\n\
                   UPDATE addresses SET eth_balance = eth_balance - 6 WHERE address = '\\x01'::bytea;\nCOMMIT;\n";
        match s.execute(sql) {
            Err(ExecError::Statement { ordinal, message }) => {
                assert_eq!(ordinal, 3);
                assert!(message.contains("negative"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(s.rows("addresses").is_empty());
        assert!(s.in_txn.is_none());
    }

    #[test]
    fn updates_deletes_and_arrays() {
        let mut s = stub();
        s.execute(
            "INSERT INTO addresses (address, eth_balance) VALUES ('\\x01'::bytea, 5);\
             UPDATE addresses SET eth_balance = eth_balance + 10 WHERE address = '\\x01'::bytea;",
        )
        .unwrap();
        assert_eq!(s.rows("addresses"), vec![vec![SqlValue::Bytes(vec![1]), SqlValue::Num(U256::from(15))]]);
        s.execute("DELETE FROM addresses WHERE address = '\\x01'::bytea;").unwrap();
        assert!(s.rows("addresses").is_empty());
        assert!(s.execute("DELETE FROM addresses WHERE address = '\\x01'::bytea;").is_err());
        let mut p = Parser {
            toks: &lex("ARRAY['\\xa9059cbb'::bytea, '\\x095ea7b3'::bytea]::bytea[]").unwrap(),
            i: 0,
        };
        assert_eq!(
            p.literal().unwrap(),
            SqlValue::Array(vec![vec![0xa9, 0x05, 0x9c, 0xbb], vec![0x09, 0x5e, 0xa7, 0xb3]])
        );
    }

    #[test]
    fn text_quotes_and_comments() {
        let toks = lex("-- note\n'it''s';").unwrap();
        assert_eq!(toks, vec![Tok::Str("it's".into()), Tok::Sym(";")]);
    }

    #[test]
    fn like_patterns() {
        assert!(like("USD Coin", "%US%"));
        assert!(!like("Tether", "%US%"));
        assert!(like("abc", "a_c"));
        assert!(like("", "%"));
        assert!(!like("ab", "a_c"));
    }

    #[test]
    fn counting_join_matches_hand_count() {
        let mut s = stub();
        s.execute(
            "INSERT INTO addresses (address, eth_balance) VALUES ('\\x01'::bytea, 5);\
             INSERT INTO addresses (address, eth_balance) VALUES ('\\x02'::bytea, 50);\
             INSERT INTO tokens (address, symbol, name, decimals, total_supply, block_hash) VALUES ('\\x01'::bytea, 'A', 'USD A', 6, 1, NULL);\
             INSERT INTO tokens (address, symbol, name, decimals, total_supply, block_hash) VALUES ('\\x02'::bytea, 'B', 'Bee', NULL, 1, NULL);",
        )
        .unwrap();
        let n = s
            .query_count("SELECT COUNT(*) FROM Addresses a, Tokens tk WHERE a.address = tk.address AND tk.name NOT LIKE '%US%'")
            .unwrap();
        assert_eq!(n, 1);
        let all = s.query_count("SELECT COUNT(*) FROM addresses a, tokens tk").unwrap();
        assert_eq!(all, 4);
        let rich = s.query_count("SELECT COUNT(*) FROM addresses a WHERE a.eth_balance >= 10").unwrap();
        assert_eq!(rich, 1);
    }
}
