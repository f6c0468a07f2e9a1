//! Query workload assets: built-in queries with metadata, user query files
//! and SQL rendering of select-project-join counting queries.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::memstore::{Predicate, SpjQuery};
use crate::workload::{datum_literal, Dialect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    #[serde(rename = "aggr")]
    Aggregation,
    #[serde(rename = "cte")]
    Cte,
    #[serde(rename = "r-cte")]
    RecursiveCte,
    #[serde(rename = "lateral")]
    Lateral,
    #[serde(rename = "set")]
    SetOps,
    #[serde(rename = "str")]
    StringFunctions,
    #[serde(rename = "sub")]
    Subquery,
    #[serde(rename = "c-sub")]
    CorrelatedSubquery,
    #[serde(rename = "win")]
    Window,
}

impl Feature {
    pub const ALL: [Feature; 9] = [
        Feature::Aggregation,
        Feature::Cte,
        Feature::RecursiveCte,
        Feature::Lateral,
        Feature::SetOps,
        Feature::StringFunctions,
        Feature::Subquery,
        Feature::CorrelatedSubquery,
        Feature::Window,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Feature::Aggregation => "aggr",
            Feature::Cte => "cte",
            Feature::RecursiveCte => "r-cte",
            Feature::Lateral => "lateral",
            Feature::SetOps => "set",
            Feature::StringFunctions => "str",
            Feature::Subquery => "sub",
            Feature::CorrelatedSubquery => "c-sub",
            Feature::Window => "win",
        }
    }
}

impl FromStr for Feature {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| format!("unknown feature tag {s:?}"))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAsset {
    pub id: String,
    /// `None` when the body lives outside this workload.
    pub sql: Option<String>,
    /// In the order listed in the file.
    pub features: Vec<Feature>,
    /// Table instances across all FROM clauses.
    pub table_instances: usize,
    pub spj: Option<SpjQuery>,
    /// Source file, or `None` for built-ins.
    pub source: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryAssetError {
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown query id {0:?}")]
    UnknownId(String),
}

const BUILTIN: [(&str, &str); 10] = [
    ("q01.sql", include_str!("../../assets/queries/q01.sql")),
    ("q02.sql", include_str!("../../assets/queries/q02.sql")),
    ("q03.sql", include_str!("../../assets/queries/q03.sql")),
    ("q04.sql", include_str!("../../assets/queries/q04.sql")),
    ("q05.sql", include_str!("../../assets/queries/q05.sql")),
    ("q06.sql", include_str!("../../assets/queries/q06.sql")),
    ("q07.sql", include_str!("../../assets/queries/q07.sql")),
    ("q08.sql", include_str!("../../assets/queries/q08.sql")),
    ("q09.sql", include_str!("../../assets/queries/q09.sql")),
    ("q10.sql", include_str!("../../assets/queries/q10.sql")),
];

const KEYS: [&str; 5] = ["id", "features", "tables", "spj", "body"];

/// Parses one query file: a header of `-- key: value` lines followed by
/// the SQL body. The header ends at the first line that is not a
/// lowercase metadata key.
pub fn parse_query_file(file: &str, text: &str) -> Result<QueryAsset, QueryAssetError> {
    let bad = |line: usize, message: String| QueryAssetError::Malformed {
        file: file.to_string(),
        line,
        message,
    };
    let mut fields: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut body_start = text.len();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let header = line
            .trim_end()
            .strip_prefix("-- ")
            .and_then(|r| r.split_once(':'))
            .filter(|(k, _)| !k.is_empty() && k.bytes().all(|b| b.is_ascii_lowercase() || b == b'-'));
        let Some((key, value)) = header else {
            body_start = offset;
            break;
        };
        if !KEYS.contains(&key) {
            return Err(bad(i + 1, format!("unknown metadata key {key:?}")));
        }
        if fields.insert(key, (i + 1, value.trim())).is_some() {
            return Err(bad(i + 1, format!("duplicate metadata key {key:?}")));
        }
        offset += line.len();
    }
    let (_, id) = *fields.get("id").ok_or_else(|| bad(1, "missing `-- id:` line".into()))?;
    if id.is_empty() || id.contains(char::is_whitespace) {
        return Err(bad(fields["id"].0, format!("invalid query id {id:?}")));
    }
    let features = match fields.get("features") {
        Some(&(line, v)) if !v.is_empty() => v
            .split(',')
            .map(|t| t.trim().parse::<Feature>().map_err(|m| bad(line, m)))
            .collect::<Result<Vec<_>, _>>()?,
        _ => Vec::new(),
    };
    let table_instances = match fields.get("tables") {
        Some(&(line, v)) => v
            .parse()
            .map_err(|_| bad(line, format!("table-instance count must be a non-negative integer, got {v:?}")))?,
        None => return Err(bad(1, "missing `-- tables:` line".into())),
    };
    let spj = match fields.get("spj") {
        Some(&(line, v)) => {
            let q: SpjQuery = serde_json::from_str(v).map_err(|e| bad(line, format!("spj form: {e}")))?;
            q.validate().map_err(|e| bad(line, format!("spj form: {e}")))?;
            Some(q)
        }
        None => None,
    };
    let body = text[body_start..].trim_end();
    let sql = match fields.get("body") {
        Some(&(line, "external")) => {
            if !body.trim().is_empty() {
                return Err(bad(line, "body marked external but SQL text follows".into()));
            }
            None
        }
        Some(&(line, v)) => return Err(bad(line, format!("body must be \"external\", got {v:?}"))),
        None if body.trim().is_empty() => return Err(bad(offset_line(text, body_start), "empty SQL body".into())),
        None => Some(format!("{body}\n")),
    };
    Ok(QueryAsset {
        id: id.to_string(),
        sql,
        features,
        table_instances,
        spj,
        source: None,
    })
}

fn offset_line(text: &str, offset: usize) -> usize {
    text[..offset].matches('\n').count() + 1
}

/// The built-in workload, ordered by id.
pub fn builtin() -> Vec<QueryAsset> {
    BUILTIN
        .iter()
        .map(|(f, t)| parse_query_file(f, t).expect("built-in query files are well-formed"))
        .collect()
}

/// Built-in queries, overridden or extended by every `*.sql` file in
/// `dir`. Files are read in name order.
pub fn load_workload(dir: Option<&Path>) -> Result<Vec<QueryAsset>, QueryAssetError> {
    let mut out = builtin();
    let Some(dir) = dir else { return Ok(out) };
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| QueryAssetError::Io { path, source }
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sql"))
        .collect();
    files.sort();
    for path in files {
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let mut q = parse_query_file(&path.display().to_string(), &text)?;
        q.source = Some(path);
        match out.iter_mut().find(|x| x.id == q.id) {
            Some(slot) => *slot = q,
            None => out.push(q),
        }
    }
    Ok(out)
}

/// Looks up `id` ignoring case and leading zeros, so `q01` names `Q1`.
pub fn find<'a>(assets: &'a [QueryAsset], id: &str) -> Result<&'a QueryAsset, QueryAssetError> {
    let key = normalize_id(id);
    assets
        .iter()
        .find(|q| normalize_id(&q.id) == key)
        .ok_or_else(|| QueryAssetError::UnknownId(id.to_string()))
}

fn normalize_id(id: &str) -> String {
    let upper = id.trim().to_ascii_uppercase();
    let split = upper.find(|c: char| c.is_ascii_digit()).unwrap_or(upper.len());
    let (prefix, digits) = upper.split_at(split);
    let digits = digits.trim_start_matches('0');
    format!("{prefix}{}", if digits.is_empty() && split < upper.len() { "0" } else { digits })
}

fn like_literal(pattern: &str) -> String {
    datum_literal(&crate::chain_model::Datum::Text(format!("%{pattern}%")), Dialect::Postgres)
}

/// `SELECT COUNT(*)` text equivalent to `q`. Substring patterns are
/// emitted inside `%...%` without escaping.
pub fn spj_count_sql(q: &SpjQuery) -> String {
    let from: Vec<String> = q.tables.iter().map(|(a, t)| format!("{} {a}", t.name())).collect();
    let mut conds: Vec<String> = q.joins.iter().map(|j| format!("{} = {}", j.left, j.right)).collect();
    for f in &q.filters {
        let lit = |d| datum_literal(d, Dialect::Postgres);
        let c = &f.column;
        conds.push(match &f.predicate {
            Predicate::Between { lo, hi } => format!("{c} BETWEEN {} AND {}", lit(lo), lit(hi)),
            Predicate::Eq { value } => format!("{c} = {}", lit(value)),
            Predicate::Ne { value } => format!("{c} <> {}", lit(value)),
            Predicate::Ge { value } => format!("{c} >= {}", lit(value)),
            Predicate::Le { value } => format!("{c} <= {}", lit(value)),
            Predicate::IsTrue => format!("{c} = TRUE"),
            Predicate::IsFalse => format!("{c} = FALSE"),
            Predicate::Contains { pattern } => format!("{c} LIKE {}", like_literal(pattern)),
            Predicate::NotContains { pattern } => format!("{c} NOT LIKE {}", like_literal(pattern)),
        });
    }
    let mut sql = format!("SELECT COUNT(*) FROM {}", from.join(", "));
    if !conds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&conds.join(" AND "));
    }
    sql.push(';');
    sql
}
