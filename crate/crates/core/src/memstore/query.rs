//! Select-project-join queries with conjunctive single-column filters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chain_model::{ColumnKind, Datum, Table, Value};

/// `alias.column`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub alias: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(alias: &str, column: &str) -> Self {
        ColumnRef {
            alias: alias.to_string(),
            column: column.to_string(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.column)
    }
}

impl FromStr for ColumnRef {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((a, c)) if !a.is_empty() && !c.is_empty() && !c.contains('.') => Ok(ColumnRef::new(a, c)),
            _ => Err(format!("expected alias.column, got {s:?}")),
        }
    }
}

impl Serialize for ColumnRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ColumnRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// Filter predicate. Comparisons against a null column value are false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    /// Inclusive range.
    Between { lo: Datum, hi: Datum },
    Eq { value: Datum },
    Ne { value: Datum },
    Ge { value: Datum },
    Le { value: Datum },
    IsTrue,
    IsFalse,
    /// Case-sensitive substring match, as `LIKE '%s%'`.
    Contains { pattern: String },
    NotContains { pattern: String },
}

impl Predicate {
    pub fn matches(&self, v: Value<'_>) -> bool {
        if v.is_null() {
            return false;
        }
        let same_kind = |d: &Datum| std::mem::discriminant(&d.as_value()) == std::mem::discriminant(&v);
        match self {
            Predicate::Between { lo, hi } => same_kind(lo) && lo.as_value() <= v && v <= hi.as_value(),
            Predicate::Eq { value } => same_kind(value) && v == value.as_value(),
            Predicate::Ne { value } => same_kind(value) && v != value.as_value(),
            Predicate::Ge { value } => same_kind(value) && v >= value.as_value(),
            Predicate::Le { value } => same_kind(value) && v <= value.as_value(),
            Predicate::IsTrue => v == Value::Bool(true),
            Predicate::IsFalse => v == Value::Bool(false),
            Predicate::Contains { pattern } => matches!(v, Value::Text(t) if t.contains(pattern.as_str())),
            Predicate::NotContains { pattern } => matches!(v, Value::Text(t) if !t.contains(pattern.as_str())),
        }
    }

    fn literals(&self) -> Vec<&Datum> {
        match self {
            Predicate::Between { lo, hi } => vec![lo, hi],
            Predicate::Eq { value } | Predicate::Ne { value } | Predicate::Ge { value } | Predicate::Le { value } => {
                vec![value]
            }
            _ => vec![],
        }
    }

    fn fits(&self, kind: ColumnKind) -> bool {
        match self {
            Predicate::IsTrue | Predicate::IsFalse => kind == ColumnKind::Bool,
            Predicate::Contains { .. } | Predicate::NotContains { .. } => kind == ColumnKind::Text,
            _ => self.literals().iter().all(|d| !matches!(d, Datum::Null) && d.fits(kind)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub column: ColumnRef,
    #[serde(flatten)]
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpjQuery {
    /// Alias to table.
    pub tables: BTreeMap<String, Table>,
    #[serde(default)]
    pub joins: Vec<JoinEdge>,
    #[serde(default)]
    pub filters: Vec<Filter>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query has no tables")]
    Empty,
    #[error("unknown alias {0:?}")]
    UnknownAlias(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("predicate on {0} does not fit the column type")]
    TypeMismatch(String),
    #[error("join graph is not connected")]
    Disconnected,
}

impl SpjQuery {
    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Table and column index of `c`.
    pub fn resolve(&self, c: &ColumnRef) -> Result<(Table, usize), QueryError> {
        let t = *self
            .tables
            .get(&c.alias)
            .ok_or_else(|| QueryError::UnknownAlias(c.alias.clone()))?;
        let i = t.column_index(&c.column).ok_or_else(|| QueryError::UnknownColumn(c.to_string()))?;
        Ok((t, i))
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.tables.is_empty() {
            return Err(QueryError::Empty);
        }
        for e in &self.joins {
            self.resolve(&e.left)?;
            self.resolve(&e.right)?;
        }
        for f in &self.filters {
            let (t, i) = self.resolve(&f.column)?;
            if !f.predicate.fits(t.columns()[i].kind) {
                return Err(QueryError::TypeMismatch(f.column.to_string()));
            }
        }
        let all: BTreeSet<&str> = self.aliases().collect();
        if !self.is_connected(&all) {
            return Err(QueryError::Disconnected);
        }
        Ok(())
    }

    /// Whether `subset` induces a connected join graph.
    pub fn is_connected(&self, subset: &BTreeSet<&str>) -> bool {
        let Some(first) = subset.iter().next() else { return false };
        let mut reached: BTreeSet<&str> = BTreeSet::from([*first]);
        let mut frontier = vec![*first];
        while let Some(a) = frontier.pop() {
            for e in &self.joins {
                let (l, r) = (e.left.alias.as_str(), e.right.alias.as_str());
                let other = if l == a {
                    r
                } else if r == a {
                    l
                } else {
                    continue;
                };
                if subset.contains(other) && reached.insert(other) {
                    frontier.push(other);
                }
            }
        }
        reached.len() == subset.len()
    }

    /// The subquery over `aliases`: their tables, the joins among them and
    /// the filters on them.
    pub fn induced<'a>(&self, aliases: impl IntoIterator<Item = &'a str>) -> SpjQuery {
        let keep: BTreeSet<&str> = aliases.into_iter().collect();
        SpjQuery {
            tables: self
                .tables
                .iter()
                .filter(|(a, _)| keep.contains(a.as_str()))
                .map(|(a, t)| (a.clone(), *t))
                .collect(),
            joins: self
                .joins
                .iter()
                .filter(|e| keep.contains(e.left.alias.as_str()) && keep.contains(e.right.alias.as_str()))
                .cloned()
                .collect(),
            filters: self
                .filters
                .iter()
                .filter(|f| keep.contains(f.column.alias.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Aliases adjacent to `alias` in the join graph.
    pub fn neighbors(&self, alias: &str) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for e in &self.joins {
            if e.left.alias == alias && e.right.alias != alias {
                out.insert(e.right.alias.as_str());
            }
            if e.right.alias == alias && e.left.alias != alias {
                out.insert(e.left.alias.as_str());
            }
        }
        out
    }
}
