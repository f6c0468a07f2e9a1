//! On-disk workload layout: SQL files, structured `.ops.json` twins, the
//! schema DDL and `manifest.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::gen::{Workload, WorkloadManifest};
use super::ops::Batch;
use super::render::{render_sql, Dialect};

pub const CREATE_SQL: &str = include_str!("../../assets/create.sql");
pub const WORKLOAD_MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum WorkloadIoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(io::Error) -> WorkloadIoError + '_ {
    move |source| WorkloadIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json(path: &Path) -> impl FnOnce(serde_json::Error) -> WorkloadIoError + '_ {
    move |source| WorkloadIoError::Json {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ops_file_name(batch: &Batch) -> String {
    format!("{}.ops.json", batch.file_stem())
}

fn write_batch(dir: &Path, batch: &Batch, dialect: Dialect) -> Result<(), WorkloadIoError> {
    let sql = dir.join(format!("{}.sql", batch.file_stem()));
    fs::write(&sql, render_sql(batch, dialect)).map_err(io(&sql))?;
    let ops = dir.join(ops_file_name(batch));
    let mut text = serde_json::to_string(batch).map_err(json(&ops))?;
    text.push('\n');
    fs::write(&ops, text).map_err(io(&ops))
}

/// Writes every artifact of `w` into `dir` and returns the manifest as
/// written.
pub fn write_workload(dir: &Path, w: &Workload, dialect: Dialect) -> Result<WorkloadManifest, WorkloadIoError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let create = dir.join("create.sql");
    fs::write(&create, CREATE_SQL).map_err(io(&create))?;
    write_batch(dir, &w.load, dialect)?;
    for pair in &w.batches {
        for b in pair.in_order() {
            write_batch(dir, b, dialect)?;
        }
    }
    let mut manifest = w.manifest.clone();
    manifest.dialect = dialect.tag().to_string();
    let path = dir.join(WORKLOAD_MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(json(&path))?;
    text.push('\n');
    fs::write(&path, text).map_err(io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<WorkloadManifest, WorkloadIoError> {
    let path = dir.join(WORKLOAD_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(json(&path))
}

/// Reads the structured twin of the SQL file `sql_file` (for example
/// `upserts-000001.sql`).
pub fn read_batch(dir: &Path, sql_file: &str) -> Result<Batch, WorkloadIoError> {
    let stem = sql_file.strip_suffix(".sql").unwrap_or(sql_file);
    let path = dir.join(format!("{stem}.ops.json"));
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(json(&path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};
    use crate::workload::{generate_workload, WorkloadConfig};

    #[test]
    fn files_round_trip_and_are_named_sequentially() {
        let ds = generate(&SynthConfig {
            seed: 2,
            n_blocks: 12,
            mean_tx_per_block: 4.0,
            address_pool: 40,
            n_tokens: 5,
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
        let dir = tempfile::tempdir().unwrap();
        let m = write_workload(dir.path(), &w, Dialect::Postgres).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
        for name in ["create.sql", "load.sql", "upserts-000001.sql", "expire-000003.sql", "upserts-000003.ops.json"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert!(!dir.path().join("upserts-000004.sql").exists());
        assert_eq!(read_batch(dir.path(), "upserts-000002.sql").unwrap(), w.batches[1].upsert);
        assert_eq!(read_batch(dir.path(), "load.sql").unwrap(), w.load);
        let sql = fs::read_to_string(dir.path().join("expire-000001.sql")).unwrap();
        assert_eq!(sql.lines().count(), w.batches[0].expire.as_ref().unwrap().ops.len() + 2);
    }
}
