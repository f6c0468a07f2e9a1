//! Q-error series across database states under both statistics policies.

use super::qerror::{qerror, Policy, QErrorPoint};
use super::subqueries::{enumerate_subqueries, Subquery};
use crate::estimator::{refresh, EstimateError, StatsCatalog};
use crate::memstore::{QueryError, SpjQuery, Store};

#[derive(Debug, thiserror::Error)]
pub enum DriftError {
    #[error("invalid query: {0}")]
    Query(#[from] QueryError),
    #[error("estimate failed: {0}")]
    Estimate(#[from] EstimateError),
    #[error("no states to observe")]
    NoStates,
}

/// Stateful probe: call [`DriftExperiment::observe`] once per state, in
/// order. The first observed state's catalog serves the initial policy.
#[derive(Debug, Clone)]
pub struct DriftExperiment {
    subqueries: Vec<Subquery>,
    policies: Vec<Policy>,
    initial: Option<StatsCatalog>,
    points: Vec<QErrorPoint>,
}

impl DriftExperiment {
    pub fn new(q: &SpjQuery, max_tables: usize, policies: &[Policy]) -> Result<Self, DriftError> {
        q.validate()?;
        let mut policies = policies.to_vec();
        policies.sort();
        policies.dedup();
        Ok(DriftExperiment {
            subqueries: enumerate_subqueries(q, max_tables),
            policies,
            initial: None,
            points: Vec::new(),
        })
    }

    pub fn subqueries(&self) -> &[Subquery] {
        &self.subqueries
    }

    /// Records one point per (policy, subquery) for the current state and
    /// returns them.
    pub fn observe(&mut self, state: &str, store: &Store) -> Result<Vec<QErrorPoint>, DriftError> {
        let current = refresh(store, state);
        if self.initial.is_none() {
            self.initial = Some(current.clone());
        }
        let mut actual = Vec::with_capacity(self.subqueries.len());
        for s in &self.subqueries {
            actual.push(store.count(&s.query)?);
        }
        let mut out = Vec::new();
        for &p in &self.policies {
            let cat = match p {
                Policy::Refreshed => &current,
                Policy::Initial => self.initial.as_ref().expect("set above"),
            };
            for (s, &a) in self.subqueries.iter().zip(&actual) {
                let e = cat.estimate(&s.query)?;
                out.push(QErrorPoint {
                    state: state.to_string(),
                    subquery: s.id.clone(),
                    policy: p,
                    estimated: e,
                    actual: a,
                    qerror: qerror(e, a),
                });
            }
        }
        self.points.extend(out.iter().cloned());
        Ok(out)
    }

    pub fn points(&self) -> &[QErrorPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<QErrorPoint> {
        self.points
    }
}

/// One point per (state, subquery) under `policy`.
pub fn drift_experiment(
    states: &[(&str, &Store)],
    q: &SpjQuery,
    max_tables: usize,
    policy: Policy,
) -> Result<Vec<QErrorPoint>, DriftError> {
    if states.is_empty() {
        return Err(DriftError::NoStates);
    }
    let mut exp = DriftExperiment::new(q, max_tables, &[policy])?;
    for (label, store) in states {
        exp.observe(label, store)?;
    }
    Ok(exp.into_points())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::{Datum, Table};
    use crate::memstore::{ColumnRef, Filter, JoinEdge, Predicate};
    use crate::synth::{generate, SynthConfig};
    use crate::workload::{generate_workload, WorkloadConfig};

    fn q() -> SpjQuery {
        SpjQuery {
            tables: [("tx", Table::Transactions), ("a", Table::Addresses)]
                .into_iter()
                .map(|(a, t)| (a.to_string(), t))
                .collect(),
            joins: vec![JoinEdge {
                left: ColumnRef::new("tx", "from_address"),
                right: ColumnRef::new("a", "address"),
            }],
            filters: vec![Filter {
                column: ColumnRef::new("tx", "gas"),
                predicate: Predicate::Ge { value: Datum::uint(150_000) },
            }],
        }
    }

    fn states() -> Vec<Store> {
        let ds = generate(&SynthConfig {
            seed: 12,
            n_blocks: 12,
            mean_tx_per_block: 10.0,
            address_pool: 60,
            n_tokens: 5,
            gas_drift_per_block: 20_000,
            ..SynthConfig::default()
        })
        .unwrap();
        let w = generate_workload(
            &ds,
            &WorkloadConfig {
                init_blocks: 6,
                granularity: 2,
                expire: true,
            },
        )
        .unwrap();
        let mut s = Store::new();
        s.apply(&w.load).unwrap();
        let mut out = vec![s.clone()];
        for p in &w.batches {
            for b in p.in_order() {
                s.apply(b).unwrap();
            }
            out.push(s.clone());
        }
        out
    }

    #[test]
    fn one_state_policies_agree() {
        let st = states();
        let a = drift_experiment(&[("W1", &st[0])], &q(), 2, Policy::Refreshed).unwrap();
        let b = drift_experiment(&[("W1", &st[0])], &q(), 2, Policy::Initial).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.estimated, x.actual, x.qerror), (y.estimated, y.actual, y.qerror));
        }
    }

    #[test]
    fn unchanged_store_gives_constant_series() {
        let st = states();
        let same = [("W1", &st[0]), ("W2", &st[0]), ("W3", &st[0])];
        for p in [Policy::Refreshed, Policy::Initial] {
            let pts = drift_experiment(&same, &q(), 2, p).unwrap();
            for s in ["a", "tx", "a ⋈ tx"] {
                let series: Vec<f64> = pts.iter().filter(|x| x.subquery == s).map(|x| x.qerror).collect();
                assert_eq!(series.len(), 3);
                assert!(series.iter().all(|v| *v == series[0]));
            }
        }
    }

    #[test]
    fn actual_counts_come_from_the_current_state() {
        let st = states();
        let labels: Vec<String> = (1..=st.len()).map(|i| format!("W{i}")).collect();
        let refs: Vec<(&str, &Store)> = labels.iter().map(String::as_str).zip(st.iter()).collect();
        let pts = drift_experiment(&refs, &q(), 2, Policy::Initial).unwrap();
        assert_eq!(pts.len(), st.len() * 3);
        for (i, s) in st.iter().enumerate() {
            let p = pts.iter().find(|p| p.state == labels[i] && p.subquery == "tx").unwrap();
            assert_eq!(p.actual, s.count(&q().induced(["tx"])).unwrap());
        }
        // Frozen statistics keep the same estimate for the filtered scan.
        let est: Vec<f64> = pts.iter().filter(|p| p.subquery == "tx").map(|p| p.estimated).collect();
        assert!(est.iter().all(|e| *e == est[0]));
    }

    #[test]
    fn empty_state_list_is_an_error() {
        assert!(matches!(drift_experiment(&[], &q(), 2, Policy::Initial), Err(DriftError::NoStates)));
    }
}
