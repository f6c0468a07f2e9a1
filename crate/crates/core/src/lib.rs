//! Benchmark harness for relational engines over evolving, Ethereum-shaped
//! ledger data: dataset generation and slicing, batched upsert/expire
//! workloads, an exact in-memory reference engine, a histogram cardinality
//! estimator and the experiments that measure estimation drift and plan
//! regret.

pub mod chain_model;
pub mod ingest;
pub mod synth;
pub mod workload;
pub mod memstore;
pub mod estimator;
pub mod eval;
pub mod replay;
pub mod queries;
pub mod scenario;
