//! Exact in-memory reference engine: applies structured batches with key and
//! foreign-key enforcement and counts SPJ query results.

mod count;
mod query;
mod store;

pub use count::default_join_order;
pub use query::{ColumnRef, Filter, JoinEdge, Predicate, QueryError, SpjQuery};
pub use store::{AnyRow, MutationSummary, Store, StoreError, StoreErrorKind, TableCounts};
