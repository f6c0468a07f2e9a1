use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain_model::{ColumnKind, Datum, Table, Value};
use crate::memstore::Store;

pub const DEFAULT_BUCKETS: usize = 100;
pub const DEFAULT_MCV: usize = 10;

/// One equi-depth bucket: smallest and largest value and row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: Datum,
    pub hi: Datum,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub n_rows: u64,
    pub null_fraction: f64,
    pub ndv: u64,
    /// Most common non-null values with their fraction of all rows,
    /// most frequent first.
    pub mcv: Vec<(Datum, f64)>,
    /// Buckets over all non-null values in ascending order; bucket sizes
    /// differ by at most one.
    pub histogram: Vec<Bucket>,
    pub bool_true_fraction: Option<f64>,
}

impl ColumnStats {
    pub fn mcv_mass(&self) -> f64 {
        self.mcv.iter().map(|(_, f)| f).sum()
    }

    pub fn non_null_fraction(&self) -> f64 {
        1.0 - self.null_fraction
    }
}

/// Whether histograms and MCV lists are kept for a column of this kind.
fn summarized(kind: ColumnKind) -> bool {
    !matches!(kind, ColumnKind::Bytes | ColumnKind::Sighashes)
}

pub fn column_stats(values: &mut [Value<'_>], kind: ColumnKind, n_buckets: usize, mcv_k: usize) -> ColumnStats {
    let n_rows = values.len() as u64;
    values.sort_unstable();
    let first_non_null = values.partition_point(|v| v.is_null());
    let non_null = &values[first_non_null..];
    let null_fraction = if n_rows == 0 { 0.0 } else { first_non_null as f64 / n_rows as f64 };

    let mut runs: Vec<(Value<'_>, u64)> = Vec::new();
    for v in non_null {
        match runs.last_mut() {
            Some((last, c)) if last == v => *c += 1,
            _ => runs.push((*v, 1)),
        }
    }
    let ndv = runs.len() as u64;

    let keep = summarized(kind);
    let mut mcv = Vec::new();
    if keep {
        let mut by_freq: Vec<&(Value<'_>, u64)> = runs.iter().collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        mcv = by_freq
            .into_iter()
            .take(mcv_k)
            .map(|(v, c)| (v.to_datum(), *c as f64 / n_rows as f64))
            .collect();
    }

    let mut histogram = Vec::new();
    if keep && !non_null.is_empty() {
        let n = non_null.len();
        let b = n_buckets.min(n).max(1);
        for i in 0..b {
            let start = i * n / b;
            let end = (i + 1) * n / b;
            histogram.push(Bucket {
                lo: non_null[start].to_datum(),
                hi: non_null[end - 1].to_datum(),
                count: (end - start) as u64,
            });
        }
    }

    let bool_true_fraction = (kind == ColumnKind::Bool).then(|| {
        let t = non_null.iter().filter(|v| **v == Value::Bool(true)).count();
        if n_rows == 0 {
            0.0
        } else {
            t as f64 / n_rows as f64
        }
    });

    ColumnStats {
        n_rows,
        null_fraction,
        ndv,
        mcv,
        histogram,
        bool_true_fraction,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsCatalog {
    /// Label of the state the statistics describe.
    pub built_at: String,
    pub n_buckets: usize,
    pub mcv_k: usize,
    pub row_counts: BTreeMap<Table, u64>,
    /// Keyed by `table.column`.
    pub columns: BTreeMap<String, ColumnStats>,
}

impl StatsCatalog {
    pub fn column(&self, table: Table, column: &str) -> Option<&ColumnStats> {
        self.columns.get(&format!("{}.{column}", table.name()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Full-scan statistics for every column of every table.
pub fn refresh(store: &Store, built_at: &str) -> StatsCatalog {
    refresh_with(store, built_at, DEFAULT_BUCKETS, DEFAULT_MCV)
}

pub fn refresh_with(store: &Store, built_at: &str, n_buckets: usize, mcv_k: usize) -> StatsCatalog {
    let mut cat = StatsCatalog {
        built_at: built_at.to_string(),
        n_buckets,
        mcv_k,
        row_counts: BTreeMap::new(),
        columns: BTreeMap::new(),
    };
    for &t in Table::ALL.iter() {
        cat.row_counts.insert(t, store.len(t) as u64);
        for (i, c) in t.columns().iter().enumerate() {
            let mut vals: Vec<Value<'_>> = store.rows(t).map(|r| r.value(i)).collect();
            let s = column_stats(&mut vals, c.kind, n_buckets, mcv_k);
            cat.columns.insert(format!("{}.{}", t.name(), c.name), s);
        }
    }
    cat
}
