//! Cardinality estimates under the independence assumption.

use super::stats::{ColumnStats, StatsCatalog};
use crate::chain_model::{u256_to_f64, Datum, Table};
use crate::memstore::{ColumnRef, Predicate, QueryError, SpjQuery};

/// Selectivity of a substring match.
pub const CONTAINS_SELECTIVITY: f64 = 0.005;
/// Selectivity of a negated substring match.
pub const NOT_CONTAINS_SELECTIVITY: f64 = 0.995;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("no statistics for column {0}")]
    MissingColumn(String),
    #[error("no row count for table {0}")]
    MissingTable(Table),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Fraction of the inclusive integer or lexical span `[lo, hi]` of a bucket
/// covered by `[qlo, qhi]`.
fn bucket_overlap(lo: &Datum, hi: &Datum, qlo: Option<&Datum>, qhi: Option<&Datum>) -> f64 {
    let below = qhi.is_some_and(|q| q < lo);
    let above = qlo.is_some_and(|q| q > hi);
    if below || above {
        return 0.0;
    }
    let covers_lo = qlo.is_none_or(|q| q <= lo);
    let covers_hi = qhi.is_none_or(|q| q >= hi);
    if covers_lo && covers_hi {
        return 1.0;
    }
    match (lo, hi) {
        (Datum::Uint(l), Datum::Uint(h)) => {
            let l = u256_to_f64(*l);
            let h = u256_to_f64(*h);
            let a = match qlo {
                Some(Datum::Uint(q)) => u256_to_f64(*q).max(l),
                _ => l,
            };
            let b = match qhi {
                Some(Datum::Uint(q)) => u256_to_f64(*q).min(h),
                _ => h,
            };
            ((b - a + 1.0) / (h - l + 1.0)).clamp(0.0, 1.0)
        }
        _ => 0.5,
    }
}

/// Fraction of all rows whose value lies in `[qlo, qhi]` (either bound
/// optional).
pub fn range_selectivity(s: &ColumnStats, qlo: Option<&Datum>, qhi: Option<&Datum>) -> f64 {
    if s.n_rows == 0 {
        return 0.0;
    }
    let hit: f64 = s
        .histogram
        .iter()
        .map(|b| b.count as f64 * bucket_overlap(&b.lo, &b.hi, qlo, qhi))
        .sum();
    (hit / s.n_rows as f64).clamp(0.0, 1.0)
}

pub fn eq_selectivity(s: &ColumnStats, v: &Datum) -> f64 {
    if let Some((_, f)) = s.mcv.iter().find(|(d, _)| d == v) {
        return *f;
    }
    let k = s.mcv.len() as u64;
    if s.ndv <= k {
        return 0.0;
    }
    ((1.0 - s.null_fraction - s.mcv_mass()) / (s.ndv - k) as f64).clamp(0.0, 1.0)
}

pub fn predicate_selectivity(s: &ColumnStats, p: &Predicate) -> f64 {
    let sel = match p {
        Predicate::Between { lo, hi } => range_selectivity(s, Some(lo), Some(hi)),
        Predicate::Ge { value } => range_selectivity(s, Some(value), None),
        Predicate::Le { value } => range_selectivity(s, None, Some(value)),
        Predicate::Eq { value } => eq_selectivity(s, value),
        Predicate::Ne { value } => s.non_null_fraction() - eq_selectivity(s, value),
        Predicate::IsTrue => s.bool_true_fraction.unwrap_or(0.0),
        Predicate::IsFalse => s.non_null_fraction() - s.bool_true_fraction.unwrap_or(0.0),
        Predicate::Contains { .. } => CONTAINS_SELECTIVITY,
        Predicate::NotContains { .. } => NOT_CONTAINS_SELECTIVITY,
    };
    sel.clamp(0.0, 1.0)
}

impl StatsCatalog {
    fn stats_for(&self, q: &SpjQuery, c: &ColumnRef) -> Result<&ColumnStats, EstimateError> {
        let (t, _) = q.resolve(c)?;
        self.column(t, &c.column)
            .ok_or_else(|| EstimateError::MissingColumn(format!("{}.{}", t.name(), c.column)))
    }

    /// Product of table row counts, filter selectivities and join
    /// selectivities `1 / max(ndv)`.
    pub fn estimate(&self, q: &SpjQuery) -> Result<f64, EstimateError> {
        let mut est = 1.0f64;
        for t in q.tables.values() {
            est *= *self.row_counts.get(t).ok_or(EstimateError::MissingTable(*t))? as f64;
        }
        for f in &q.filters {
            est *= predicate_selectivity(self.stats_for(q, &f.column)?, &f.predicate);
        }
        for e in &q.joins {
            let l = self.stats_for(q, &e.left)?.ndv;
            let r = self.stats_for(q, &e.right)?.ndv;
            let m = l.max(r);
            est *= if m == 0 { 0.0 } else { 1.0 / m as f64 };
        }
        Ok(est.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::super::stats::{column_stats, refresh};
    use super::*;
    use crate::chain_model::{
        AccountAddress, AddressRow, Block, ByteString, ColumnKind, HashId, Row, Transaction, Value, Wei, U256,
    };
    use crate::memstore::{Filter, JoinEdge, Store};
    use crate::workload::Mutation;
    use rand::{Rng, SeedableRng};

    fn addr(i: u32) -> AccountAddress {
        let mut a = [0u8; 20];
        a[16..].copy_from_slice(&i.to_be_bytes());
        AccountAddress(a)
    }

    fn hash(i: u32) -> HashId {
        let mut h = [0u8; 32];
        h[28..].copy_from_slice(&i.to_be_bytes());
        HashId(h)
    }

    /// One block, `n_addr` addresses and `n_tx` transactions whose sender is
    /// address `i` and whose gas and value both equal `i`.
    fn constructed(n_addr: u32, n_tx: u32) -> Store {
        let mut ops = Vec::new();
        for i in 0..n_addr {
            ops.push(Mutation::Insert(Row::Addresses(AddressRow {
                address: addr(i),
                eth_balance: Wei::from_u64(i as u64),
            })));
        }
        let block = hash(u32::MAX);
        ops.push(Mutation::Insert(Row::Blocks(Block {
            hash: block,
            number: 1,
            timestamp: 1,
            extra_data: ByteString(vec![]),
            base_fee_per_gas: Wei::ZERO,
            size: 1,
            miner: addr(0),
        })));
        for i in 0..n_tx {
            ops.push(Mutation::Insert(Row::Transactions(Transaction {
                hash: hash(i),
                transaction_index: i as u64,
                value: Wei::from_u64(i as u64),
                from_address: addr(i),
                to_address: None,
                gas: i as u64,
                max_priority_fee_per_gas: None,
                input: ByteString(vec![]),
                block_hash: block,
                transaction_type: 2,
                nonce: 0,
            })));
        }
        let mut s = Store::new();
        s.apply_ops(&ops).unwrap();
        s
    }

    fn single(alias: &str, t: Table) -> SpjQuery {
        SpjQuery {
            tables: [(alias.to_string(), t)].into_iter().collect(),
            ..SpjQuery::default()
        }
    }

    fn qerr(e: f64, t: f64) -> f64 {
        let (e, t) = (e.max(1.0), t.max(1.0));
        (e / t).max(t / e)
    }

    #[test]
    fn unfiltered_single_table_is_exact() {
        let s = constructed(300, 120);
        let cat = refresh(&s, "W1");
        for (t, n) in [(Table::Addresses, 300.0), (Table::Transactions, 120.0), (Table::Blocks, 1.0)] {
            assert_eq!(cat.estimate(&single("x", t)).unwrap(), n);
        }
    }

    #[test]
    fn key_join_estimate_equals_true_count() {
        let s = constructed(1000, 500);
        let cat = refresh(&s, "W1");
        let mut q = single("a", Table::Addresses);
        q.tables.insert("tx".into(), Table::Transactions);
        q.joins.push(JoinEdge {
            left: ColumnRef::new("tx", "from_address"),
            right: ColumnRef::new("a", "address"),
        });
        let est = cat.estimate(&q).unwrap();
        assert!((est - 500.0).abs() < 1e-9);
        assert_eq!(s.count(&q).unwrap(), 500);
    }

    #[test]
    fn correlated_filters_fool_independence() {
        let s = constructed(1000, 1000);
        let cat = refresh(&s, "W1");
        let mut q = single("tx", Table::Transactions);
        q.filters.push(Filter {
            column: ColumnRef::new("tx", "gas"),
            predicate: Predicate::Le { value: Datum::uint(99) },
        });
        q.filters.push(Filter {
            column: ColumnRef::new("tx", "value"),
            predicate: Predicate::Ge { value: Datum::uint(900) },
        });
        assert_eq!(s.count(&q).unwrap(), 0);
        let est = cat.estimate(&q).unwrap();
        assert!((est - 10.0).abs() < 1e-9, "{est}");
    }

    #[test]
    fn missing_stats_name_the_column() {
        let s = constructed(10, 10);
        let mut cat = refresh(&s, "W1");
        cat.columns.remove("transactions.gas");
        let mut q = single("tx", Table::Transactions);
        q.filters.push(Filter {
            column: ColumnRef::new("tx", "gas"),
            predicate: Predicate::Le { value: Datum::uint(3) },
        });
        assert_eq!(
            cat.estimate(&q).unwrap_err(),
            EstimateError::MissingColumn("transactions.gas".into())
        );
    }

    #[test]
    fn refresh_is_deterministic_and_serializes() {
        let s = constructed(50, 40);
        let a = refresh(&s, "W3");
        assert_eq!(a, refresh(&s, "W3"));
        assert_eq!(StatsCatalog::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn uniform_ranges_estimate_within_one_and_a_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let owned: Vec<U256> = (0..10_000).map(|_| U256::from(rng.random_range(0..1_000_000u64))).collect();
        let mut vals: Vec<Value<'_>> = owned.iter().map(|u| Value::Uint(*u)).collect();
        let s = column_stats(&mut vals, ColumnKind::Uint, 100, 10);
        for _ in 0..200 {
            let lo = rng.random_range(0..950_000u64);
            let hi = lo + rng.random_range(50_000..1_000_000 - lo);
            let truth = owned.iter().filter(|u| **u >= U256::from(lo) && **u <= U256::from(hi)).count() as f64;
            let est = range_selectivity(&s, Some(&Datum::uint(lo)), Some(&Datum::uint(hi))) * 10_000.0;
            assert!(qerr(est, truth) <= 1.5, "[{lo},{hi}] est {est} true {truth}");
        }
    }

    #[test]
    fn equality_uses_mcv_then_uniform_remainder() {
        let owned: Vec<U256> = (0..100u64).map(|i| U256::from(if i < 50 { 7 } else { i })).collect();
        let mut vals: Vec<Value<'_>> = owned.iter().map(|u| Value::Uint(*u)).collect();
        vals.push(Value::Null);
        let s = column_stats(&mut vals, ColumnKind::Uint, 10, 3);
        assert!((eq_selectivity(&s, &Datum::uint(7)) - 50.0 / 101.0).abs() < 1e-12);
        // 51 distinct, 3 in the MCV list, one null row.
        let expected = (1.0 - 1.0 / 101.0 - s.mcv_mass()) / 48.0;
        assert!((eq_selectivity(&s, &Datum::uint(77)) - expected).abs() < 1e-12);
        let ne = predicate_selectivity(&s, &Predicate::Ne { value: Datum::uint(7) });
        assert!((ne - (100.0 / 101.0 - 50.0 / 101.0)).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn adding_a_filter_never_increases_the_estimate(gmax in 0u64..600, vmin in 0u64..600, use_ge in proptest::bool::ANY) {
            let s = constructed(500, 500);
            let cat = refresh(&s, "W1");
            let mut q = single("tx", Table::Transactions);
            q.filters.push(Filter { column: ColumnRef::new("tx", "gas"), predicate: Predicate::Le { value: Datum::uint(gmax) } });
            let before = cat.estimate(&q).unwrap();
            let p = if use_ge { Predicate::Ge { value: Datum::uint(vmin) } } else { Predicate::Ne { value: Datum::uint(vmin) } };
            q.filters.push(Filter { column: ColumnRef::new("tx", "value"), predicate: p });
            let after = cat.estimate(&q).unwrap();
            proptest::prop_assert!(after <= before + 1e-9);
            proptest::prop_assert!(after >= 0.0);
        }
    }
}
