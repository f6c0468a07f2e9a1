//! Exact COUNT(*) of an SPJ query by left-deep hash joins.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::query::{QueryError, SpjQuery};
use super::store::{AnyRow, Store};
use crate::chain_model::Value;

/// Join order that visits aliases breadth-first from the smallest alias
/// name, so every alias after the first has a join partner before it.
pub fn default_join_order(q: &SpjQuery) -> Vec<String> {
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    for start in q.aliases() {
        if !seen.insert(start) {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            order.push(a.to_string());
            for n in q.neighbors(a) {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    order
}

impl Store {
    /// Rows of `alias` that pass every filter on it.
    fn filtered_rows<'s>(&'s self, q: &SpjQuery, alias: &str) -> Result<Vec<AnyRow<'s>>, QueryError> {
        let table = q.tables[alias];
        let mut preds = Vec::new();
        for f in q.filters.iter().filter(|f| f.column.alias == alias) {
            preds.push((q.resolve(&f.column)?.1, &f.predicate));
        }
        let mut self_edges = Vec::new();
        for e in q.joins.iter().filter(|e| e.left.alias == alias && e.right.alias == alias) {
            self_edges.push((q.resolve(&e.left)?.1, q.resolve(&e.right)?.1));
        }
        Ok(self
            .rows(table)
            .filter(|r| preds.iter().all(|(i, p)| p.matches(r.value(*i))))
            .filter(|r| {
                self_edges.iter().all(|(i, j)| {
                    let v = r.value(*i);
                    !v.is_null() && v == r.value(*j)
                })
            })
            .collect())
    }

    /// Exact result cardinality of `q`.
    pub fn count(&self, q: &SpjQuery) -> Result<u64, QueryError> {
        q.validate()?;
        let order = default_join_order(q);
        self.count_in_order(q, &order)
    }

    /// Exact cardinality joining aliases in `order`. Aliases with no join
    /// partner earlier in the order are cross-joined.
    pub fn count_in_order(&self, q: &SpjQuery, order: &[String]) -> Result<u64, QueryError> {
        let mut rows: Vec<Vec<AnyRow<'_>>> = Vec::with_capacity(order.len());
        for a in order {
            if !q.tables.contains_key(a) {
                return Err(QueryError::UnknownAlias(a.clone()));
            }
            rows.push(self.filtered_rows(q, a)?);
        }
        if rows.is_empty() {
            return Err(QueryError::Empty);
        }
        let pos_of: HashMap<&str, usize> = order.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut tuples: Vec<Vec<u32>> = (0..rows[0].len() as u32).map(|i| vec![i]).collect();
        for step in 1..order.len() {
            // (earlier position, earlier column, this column)
            let mut keys = Vec::new();
            for e in &q.joins {
                let (l, r) = (pos_of[e.left.alias.as_str()], pos_of[e.right.alias.as_str()]);
                if l == step && r < step {
                    keys.push((r, q.resolve(&e.right)?.1, q.resolve(&e.left)?.1));
                } else if r == step && l < step {
                    keys.push((l, q.resolve(&e.left)?.1, q.resolve(&e.right)?.1));
                }
            }
            let mut buckets: HashMap<Vec<Value<'_>>, Vec<u32>> = HashMap::new();
            'rows: for (i, row) in rows[step].iter().enumerate() {
                let mut key = Vec::with_capacity(keys.len());
                for (_, _, col) in &keys {
                    let v = row.value(*col);
                    if v.is_null() {
                        continue 'rows;
                    }
                    key.push(v);
                }
                buckets.entry(key).or_default().push(i as u32);
            }
            let last = step + 1 == order.len();
            let mut next = Vec::new();
            let mut total = 0u64;
            'tuples: for t in &tuples {
                let mut key = Vec::with_capacity(keys.len());
                for (pos, col, _) in &keys {
                    let v = rows[*pos][t[*pos] as usize].value(*col);
                    if v.is_null() {
                        continue 'tuples;
                    }
                    key.push(v);
                }
                let Some(hits) = buckets.get(&key) else { continue };
                if last {
                    total += hits.len() as u64;
                } else {
                    for h in hits {
                        let mut n = t.clone();
                        n.push(*h);
                        next.push(n);
                    }
                }
            }
            if last {
                return Ok(total);
            }
            tuples = next;
        }
        Ok(tuples.len() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::super::query::{ColumnRef, Filter, JoinEdge, Predicate};
    use super::*;
    use crate::chain_model::{Datum, Table, U256};
    use crate::synth::{generate, SynthConfig};
    use crate::workload::{generate_workload, WorkloadConfig};
    use proptest::prelude::*;

    fn store(seed: u64) -> Store {
        let ds = generate(&SynthConfig {
            seed,
            n_blocks: 12,
            mean_tx_per_block: 10.0,
            address_pool: 50,
            n_tokens: 8,
            ..SynthConfig::default()
        })
        .unwrap();
        let w = generate_workload(
            &ds,
            &WorkloadConfig {
                init_blocks: 11,
                granularity: 1,
                expire: false,
            },
        )
        .unwrap();
        let mut s = Store::new();
        s.apply(&w.load).unwrap();
        for p in &w.batches {
            s.apply(&p.upsert).unwrap();
        }
        s
    }

    /// Brute-force oracle: enumerate the full cross product.
    fn nested_loop(s: &Store, q: &SpjQuery) -> u64 {
        let aliases: Vec<&str> = q.aliases().collect();
        let tables: Vec<Vec<AnyRow<'_>>> = aliases.iter().map(|a| s.rows(q.tables[*a]).collect()).collect();
        let idx = |a: &str| aliases.iter().position(|x| *x == a).unwrap();
        let col = |c: &ColumnRef| q.resolve(c).unwrap().1;
        let mut count = 0;
        let mut cur = vec![0usize; aliases.len()];
        if tables.iter().any(|t| t.is_empty()) {
            return 0;
        }
        loop {
            let ok_f = q
                .filters
                .iter()
                .all(|f| f.predicate.matches(tables[idx(&f.column.alias)][cur[idx(&f.column.alias)]].value(col(&f.column))));
            let ok_j = q.joins.iter().all(|e| {
                let l = tables[idx(&e.left.alias)][cur[idx(&e.left.alias)]].value(col(&e.left));
                let r = tables[idx(&e.right.alias)][cur[idx(&e.right.alias)]].value(col(&e.right));
                !l.is_null() && l == r
            });
            if ok_f && ok_j {
                count += 1;
            }
            let mut k = 0;
            loop {
                if k == cur.len() {
                    return count;
                }
                cur[k] += 1;
                if cur[k] < tables[k].len() {
                    break;
                }
                cur[k] = 0;
                k += 1;
            }
        }
    }

    fn edge(l: (&str, &str), r: (&str, &str)) -> JoinEdge {
        JoinEdge {
            left: ColumnRef::new(l.0, l.1),
            right: ColumnRef::new(r.0, r.1),
        }
    }

    /// Candidate join shapes over the schema's foreign keys.
    fn shapes() -> Vec<SpjQuery> {
        let t = |pairs: &[(&str, Table)]| pairs.iter().map(|(a, t)| (a.to_string(), *t)).collect();
        vec![
            SpjQuery {
                tables: t(&[("tx", Table::Transactions)]),
                ..SpjQuery::default()
            },
            SpjQuery {
                tables: t(&[("tx", Table::Transactions), ("b", Table::Blocks)]),
                joins: vec![edge(("tx", "block_hash"), ("b", "hash"))],
                filters: vec![],
            },
            SpjQuery {
                tables: t(&[("tx", Table::Transactions), ("tk_tx", Table::TokenTransactions), ("tk", Table::Tokens)]),
                joins: vec![
                    edge(("tk_tx", "transaction_hash"), ("tx", "hash")),
                    edge(("tk_tx", "token_address"), ("tk", "address")),
                ],
                filters: vec![],
            },
            SpjQuery {
                tables: t(&[("tx", Table::Transactions), ("c", Table::Contracts), ("a", Table::Addresses)]),
                joins: vec![edge(("tx", "to_address"), ("c", "address")), edge(("tx", "from_address"), ("a", "address"))],
                filters: vec![],
            },
            SpjQuery {
                tables: t(&[("w", Table::Withdrawals), ("a", Table::Addresses), ("b", Table::Blocks)]),
                joins: vec![edge(("w", "address"), ("a", "address")), edge(("w", "hash"), ("b", "hash"))],
                filters: vec![],
            },
        ]
    }

    fn filter_for(shape: &SpjQuery, choice: u8, x: u64) -> Option<Filter> {
        let (alias, column, predicate) = match choice % 6 {
            0 => ("tx", "gas", Predicate::Le { value: Datum::uint(21_000 + x * 2_000) }),
            1 => ("tx", "transaction_index", Predicate::Between { lo: Datum::uint(x % 5), hi: Datum::uint(x % 5 + 4) }),
            2 => ("tk", "name", Predicate::NotContains { pattern: "US".into() }),
            3 => ("c", "is_erc20", Predicate::IsTrue),
            4 => ("a", "eth_balance", Predicate::Ge { value: Datum::Uint(U256::exp10(19) * U256::from(x % 20)) }),
            _ => ("b", "number", Predicate::Ne { value: Datum::uint(19_005_000 + x % 12) }),
        };
        shape.tables.contains_key(alias).then(|| Filter {
            column: ColumnRef::new(alias, column),
            predicate,
        })
    }

    #[test]
    fn single_table_unfiltered_is_row_count() {
        let s = store(1);
        let q = &shapes()[0];
        assert_eq!(s.count(q).unwrap(), s.len(Table::Transactions) as u64);
    }

    #[test]
    fn join_on_nullable_column_skips_nulls() {
        let s = store(2);
        let q = &shapes()[3];
        assert_eq!(s.count(q).unwrap(), nested_loop(&s, q));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn hash_join_matches_nested_loop(seed in 0u64..4, shape in 0usize..5, choices in proptest::collection::vec((0u8..6, 0u64..40), 0..3)) {
            let s = store(seed);
            let mut q = shapes()[shape].clone();
            for (c, x) in choices {
                q.filters.extend(filter_for(&q, c, x));
            }
            let expected = nested_loop(&s, &q);
            prop_assert_eq!(s.count(&q).unwrap(), expected);
            let mut rev = default_join_order(&q);
            rev.reverse();
            prop_assert_eq!(s.count_in_order(&q, &rev).unwrap(), expected);
        }
    }
}
