//! Initial-load and batched upsert/expire workloads over a dataset, in
//! structured and SQL form.

mod files;
mod gen;
mod ops;
mod render;

pub use files::{ops_file_name, read_batch, read_manifest, write_workload, WorkloadIoError, CREATE_SQL, WORKLOAD_MANIFEST};
pub use gen::{
    gen_batches, gen_initial, generate_workload, BatchEntry, BatchPair, Workload, WorkloadConfig, WorkloadError,
    WorkloadManifest,
};
pub use ops::{Batch, BatchKind, Mutation};
pub use render::{datum_literal, render_mutation, render_sql, Dialect, UnknownDialect};
