//! Histogram-based cardinality estimator with explicit refresh control.

mod estimate;
mod stats;

pub use estimate::{
    eq_selectivity, predicate_selectivity, range_selectivity, EstimateError, CONTAINS_SELECTIVITY,
    NOT_CONTAINS_SELECTIVITY,
};
pub use stats::{column_stats, refresh, refresh_with, Bucket, ColumnStats, StatsCatalog, DEFAULT_BUCKETS, DEFAULT_MCV};
