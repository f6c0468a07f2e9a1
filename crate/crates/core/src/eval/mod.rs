//! Experiments over database states: subquery enumeration, Q-error drift,
//! latency medians and plan-regret matrices.

mod drift;
mod latency;
mod qerror;
mod regret;
mod subqueries;

pub use drift::{drift_experiment, DriftError, DriftExperiment};
pub use latency::{measure_latency, median, LatencyError, LatencyResult, MIN_REPS};
pub use qerror::{qerror, Policy, QErrorPoint};
pub use regret::{
    regret_matrix, Direction, Metric, PlanMeasurement, RegretCell, RegretError, RegretMatrix, TIE_TOLERANCE,
};
pub use subqueries::{enumerate_subqueries, subquery_id, Subquery, JOIN_SEP};
mod report;
pub use report::{omit_accurate, read_jsonl, series_csv, write_jsonl, JsonlError, ACCURATE_QERROR};
