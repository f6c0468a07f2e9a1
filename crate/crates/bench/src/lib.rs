//! Criterion benchmarks for the in-memory counter, the estimator and the
//! workload generator; see `benches/harness.rs`.
