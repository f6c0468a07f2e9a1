//! Connected-subgraph enumeration over a query's join graph.

use std::collections::BTreeSet;

use crate::memstore::SpjQuery;

/// Separator between aliases in a subquery id.
pub const JOIN_SEP: &str = " ⋈ ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subquery {
    /// Sorted aliases joined by [`JOIN_SEP`].
    pub id: String,
    pub aliases: Vec<String>,
    pub query: SpjQuery,
}

pub fn subquery_id<S: AsRef<str>>(aliases: &[S]) -> String {
    aliases.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(JOIN_SEP)
}

/// Every connected induced subgraph of `q`'s join graph with at most
/// `max_tables` aliases, ordered by size and then by sorted alias list.
/// Each subgraph is produced once (ESU extension over a vertex order).
pub fn enumerate_subqueries(q: &SpjQuery, max_tables: usize) -> Vec<Subquery> {
    let verts: Vec<&str> = q.aliases().collect();
    let pos = |a: &str| verts.iter().position(|v| *v == a).expect("alias of q");
    let adj: Vec<BTreeSet<usize>> = verts.iter().map(|v| q.neighbors(v).into_iter().map(pos).collect()).collect();
    let mut found: Vec<Vec<usize>> = Vec::new();

    fn extend(
        sub: &mut Vec<usize>,
        ext: BTreeSet<usize>,
        root: usize,
        adj: &[BTreeSet<usize>],
        max: usize,
        found: &mut Vec<Vec<usize>>,
    ) {
        let mut sorted = sub.clone();
        sorted.sort_unstable();
        found.push(sorted);
        if sub.len() == max {
            return;
        }
        let mut ext = ext;
        while let Some(&w) = ext.iter().next() {
            ext.remove(&w);
            // Exclusive neighbours of w: beyond the root, not in or adjacent
            // to the current subgraph.
            let mut next = ext.clone();
            for &u in &adj[w] {
                if u > root && !sub.contains(&u) && !sub.iter().any(|s| adj[*s].contains(&u)) {
                    next.insert(u);
                }
            }
            sub.push(w);
            extend(sub, next, root, adj, max, found);
            sub.pop();
        }
    }

    if max_tables > 0 {
        for v in 0..verts.len() {
            let ext: BTreeSet<usize> = adj[v].iter().copied().filter(|u| *u > v).collect();
            extend(&mut vec![v], ext, v, &adj, max_tables, &mut found);
        }
    }
    let mut subs: Vec<Vec<String>> = found
        .into_iter()
        .map(|s| s.into_iter().map(|i| verts[i].to_string()).collect())
        .collect();
    subs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subs.into_iter()
        .map(|aliases| Subquery {
            id: subquery_id(&aliases),
            query: q.induced(aliases.iter().map(String::as_str)),
            aliases,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::Table;
    use crate::memstore::{ColumnRef, JoinEdge};
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> SpjQuery {
        let name = |i: usize| format!("t{i}");
        SpjQuery {
            tables: (0..n).map(|i| (name(i), Table::Blocks)).collect(),
            joins: edges
                .iter()
                .map(|(a, b)| JoinEdge {
                    left: ColumnRef::new(&name(*a), "hash"),
                    right: ColumnRef::new(&name(*b), "hash"),
                })
                .collect(),
            filters: vec![],
        }
    }

    /// Brute force: every alias subset whose induced graph is connected.
    fn brute(q: &SpjQuery, max: usize) -> Vec<Vec<String>> {
        let verts: Vec<&str> = q.aliases().collect();
        let mut out = Vec::new();
        for mask in 1u32..(1 << verts.len()) {
            let set: BTreeSet<&str> = (0..verts.len()).filter(|i| mask & (1 << i) != 0).map(|i| verts[i]).collect();
            if set.len() <= max && q.is_connected(&set) {
                out.push(set.into_iter().map(str::to_string).collect());
            }
        }
        out.sort_by(|a: &Vec<String>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    #[test]
    fn star_with_tail_gives_thirteen_up_to_three() {
        // tx hub joined to a, c and tk_tx; tk_tx joined to tk.
        let q = graph(5, &[(0, 1), (0, 2), (0, 3), (3, 4)]);
        let subs = enumerate_subqueries(&q, 3);
        assert_eq!(subs.len(), 13);
        let sizes: Vec<usize> = subs.iter().map(|s| s.aliases.len()).collect();
        assert_eq!(sizes.iter().filter(|s| **s == 1).count(), 5);
        assert_eq!(sizes.iter().filter(|s| **s == 2).count(), 4);
        assert_eq!(sizes.iter().filter(|s| **s == 3).count(), 4);
        assert_eq!(subs.iter().map(|s| s.aliases.clone()).collect::<Vec<_>>(), brute(&q, 3));
    }

    #[test]
    fn small_cases() {
        let q = graph(5, &[(0, 1), (0, 2), (0, 3), (3, 4)]);
        assert_eq!(enumerate_subqueries(&q, 1).len(), 5);
        let q = graph(2, &[(0, 1)]);
        let subs = enumerate_subqueries(&q, 5);
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[2].id, "t0 ⋈ t1");
        assert_eq!(subs[2].query.joins.len(), 1);
        assert!(enumerate_subqueries(&q, 0).is_empty());
    }

    proptest! {
        #[test]
        fn matches_brute_force_on_small_graphs(n in 1usize..=6, raw in proptest::collection::vec((0usize..6, 0usize..6), 0..12), max in 1usize..=6) {
            let edges: Vec<(usize, usize)> = raw.into_iter().filter(|(a, b)| a < &n && b < &n && a != b).collect();
            let q = graph(n, &edges);
            let got: Vec<Vec<String>> = enumerate_subqueries(&q, max).into_iter().map(|s| s.aliases).collect();
            prop_assert_eq!(got, brute(&q, max));
        }
    }
}
