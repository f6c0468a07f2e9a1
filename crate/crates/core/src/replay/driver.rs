//! Ordered application of a workload directory to a target.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::executor::{ExecError, SqlExecutor, SqlExecutorCaps};
use crate::memstore::Store;
use crate::workload::{read_batch, Batch, BatchKind, WorkloadIoError, WorkloadManifest, WORKLOAD_MANIFEST};

pub const CHECKPOINT_FILE: &str = "replay.ckpt.json";

/// Something a workload can be applied to. Every call applies one batch
/// atomically or not at all.
pub trait ReplayTarget {
    /// Whether [`ReplayTarget::apply`] consumes structured operations; when
    /// false the SQL text is what gets applied.
    fn wants_ops(&self) -> bool;

    fn init_schema(&mut self, create_sql: &str) -> Result<(), ExecError>;

    fn apply(&mut self, batch: &Batch, sql: &str) -> Result<(), ExecError>;

    fn store(&self) -> Option<&Store> {
        None
    }

    fn executor(&mut self) -> Option<&mut dyn SqlExecutor> {
        None
    }
}

impl ReplayTarget for Store {
    fn wants_ops(&self) -> bool {
        true
    }

    fn init_schema(&mut self, _create_sql: &str) -> Result<(), ExecError> {
        Ok(())
    }

    /// Store errors carry the operation index; statement 1 is `BEGIN`.
    fn apply(&mut self, batch: &Batch, _sql: &str) -> Result<(), ExecError> {
        Store::apply(self, batch).map(drop).map_err(|e| ExecError::Statement {
            ordinal: e.op_index + 2,
            message: e.to_string(),
        })
    }

    fn store(&self) -> Option<&Store> {
        Some(self)
    }
}

/// Target that executes the rendered SQL files.
pub struct SqlTarget {
    pub exec: Box<dyn SqlExecutor>,
    pub caps: SqlExecutorCaps,
}

impl SqlTarget {
    pub fn new(exec: Box<dyn SqlExecutor>) -> Self {
        let caps = exec.caps();
        SqlTarget { exec, caps }
    }
}

impl ReplayTarget for SqlTarget {
    fn wants_ops(&self) -> bool {
        false
    }

    fn init_schema(&mut self, create_sql: &str) -> Result<(), ExecError> {
        self.exec.execute(create_sql)
    }

    fn apply(&mut self, _batch: &Batch, sql: &str) -> Result<(), ExecError> {
        self.exec.execute(sql)
    }

    fn executor(&mut self) -> Option<&mut dyn SqlExecutor> {
        Some(self.exec.as_mut())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PaceMode {
    MaxSpeed,
    /// Sleeps for the block-timestamp gap divided by `scale` between
    /// consecutive batches.
    Realtime { scale: f64 },
}

pub trait Sleeper {
    fn sleep(&mut self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested sleeps without waiting.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    pub slept: Vec<Duration>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&mut self, d: Duration) {
        self.slept.push(d);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayCheckpoint {
    pub manifest_sha256: String,
    /// `None` before the load, 0 after the load, `i` after batch `i`.
    pub last_applied_batch: Option<usize>,
    /// The expire half of batch `last_applied_batch + 1` is already applied.
    pub expire_applied: bool,
    pub applied_at_unix_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub pace: PaceMode,
    /// Where the checkpoint lives; `None` disables checkpointing.
    pub checkpoint: Option<PathBuf>,
    /// Continue from an existing checkpoint instead of starting over.
    pub resume: bool,
    /// Execute `create.sql` before the load.
    pub create_schema: bool,
    /// Stop (as if interrupted) once this batch index has been applied.
    pub stop_after: Option<usize>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            pace: PaceMode::MaxSpeed,
            checkpoint: None,
            resume: false,
            create_schema: true,
            stop_after: None,
        }
    }
}

impl ReplayOptions {
    pub fn checkpoint_in(dir: &Path) -> PathBuf {
        dir.join(CHECKPOINT_FILE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedFile {
    /// Database state reached once this batch index completes (`W1` after
    /// the load, `W{i+1}` after batch `i`).
    pub state: String,
    pub file: String,
    pub kind: BatchKind,
    pub index: usize,
    pub ops: usize,
    pub apply_ms: f64,
    pub slept_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub manifest_sha256: String,
    pub resumed_after: Option<usize>,
    pub applied: Vec<AppliedFile>,
    pub last_applied_batch: Option<usize>,
    pub complete: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Workload(#[from] WorkloadIoError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("checkpoint {}: {message}", path.display())]
    BadCheckpoint { path: PathBuf, message: String },
    #[error("checkpoint belongs to workload {found}, not {expected}; refusing to resume")]
    CheckpointMismatch { expected: String, found: String },
    #[error("batch {index} ({file}) failed at statement {ordinal}: {message}")]
    Statement {
        index: usize,
        file: String,
        ordinal: usize,
        message: String,
    },
    #[error("batch {index} ({file}): {source}")]
    Target {
        index: usize,
        file: String,
        #[source]
        source: ExecError,
    },
    #[error("hook {hook} failed at state {state}: {message}")]
    Hook { hook: String, state: String, message: String },
}

/// What a between-batch hook sees.
pub struct HookContext<'a> {
    pub state: String,
    pub batch_index: usize,
    pub target: &'a mut dyn ReplayTarget,
}

pub type HookFn<'h> = Box<dyn FnMut(&mut HookContext<'_>) -> Result<(), String> + 'h>;

/// Callback run after the load and after every batch, before any sleep or
/// further apply.
pub struct Hook<'h> {
    pub name: String,
    pub continue_on_error: bool,
    pub callback: HookFn<'h>,
}

impl<'h> Hook<'h> {
    pub fn new(name: impl Into<String>, callback: impl FnMut(&mut HookContext<'_>) -> Result<(), String> + 'h) -> Self {
        Hook {
            name: name.into(),
            continue_on_error: false,
            callback: Box::new(callback),
        }
    }

    pub fn continue_on_error(mut self, yes: bool) -> Self {
        self.continue_on_error = yes;
        self
    }
}

/// Label of the state reached after batch `index` (0 is the load).
pub fn state_label(index: usize) -> String {
    format!("W{}", index + 1)
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn read_text(path: &Path) -> Result<String, ReplayError> {
    fs::read_to_string(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn manifest_digest(dir: &Path) -> Result<(WorkloadManifest, String), ReplayError> {
    let path = dir.join(WORKLOAD_MANIFEST);
    let text = read_text(&path)?;
    let manifest: WorkloadManifest = serde_json::from_str(&text).map_err(|source| WorkloadIoError::Json {
        path: path.clone(),
        source,
    })?;
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((manifest, hex))
}

pub fn read_checkpoint(path: &Path) -> Result<Option<ReplayCheckpoint>, ReplayError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = read_text(path)?;
    serde_json::from_str(&text).map(Some).map_err(|e| ReplayError::BadCheckpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_checkpoint(path: &Path, ck: &ReplayCheckpoint) -> Result<(), ReplayError> {
    let mut text = serde_json::to_string_pretty(ck).expect("checkpoint serializes");
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| ReplayError::Io { path: p, source }
    };
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

struct Step {
    index: usize,
    file: String,
    /// The step completes batch `index`.
    completes: bool,
}

fn steps(m: &WorkloadManifest) -> Vec<Step> {
    let mut out = vec![Step {
        index: 0,
        file: m.load_file.clone(),
        completes: true,
    }];
    for b in &m.batches {
        if let Some(e) = &b.expire_file {
            out.push(Step {
                index: b.index,
                file: e.clone(),
                completes: false,
            });
        }
        out.push(Step {
            index: b.index,
            file: b.upsert_file.clone(),
            completes: true,
        });
    }
    out
}

/// Number of leading steps a checkpoint covers.
fn steps_done(all: &[Step], ck: &ReplayCheckpoint) -> usize {
    let Some(last) = ck.last_applied_batch else { return 0 };
    let mut n = all.iter().take_while(|s| s.index <= last).count();
    if ck.expire_applied && all.get(n).is_some_and(|s| !s.completes) {
        n += 1;
    }
    n
}

fn run_hooks(hooks: &mut [Hook<'_>], target: &mut dyn ReplayTarget, index: usize) -> Result<(), ReplayError> {
    for h in hooks.iter_mut() {
        let mut ctx = HookContext {
            state: state_label(index),
            batch_index: index,
            target: &mut *target,
        };
        if let Err(message) = (h.callback)(&mut ctx) {
            if !h.continue_on_error {
                return Err(ReplayError::Hook {
                    hook: h.name.clone(),
                    state: state_label(index),
                    message,
                });
            }
        }
    }
    Ok(())
}

/// Applies the workload in `dir`: the load, then for each batch its expire
/// file (when present) followed by its upsert file. A checkpoint is written
/// after every file; hooks run whenever a batch index completes.
pub fn replay(
    target: &mut dyn ReplayTarget,
    dir: &Path,
    opts: &ReplayOptions,
    hooks: &mut [Hook<'_>],
    sleeper: &mut dyn Sleeper,
) -> Result<ReplayReport, ReplayError> {
    let (manifest, digest) = manifest_digest(dir)?;
    let all = steps(&manifest);
    let mut start = 0;
    let mut resumed_after = None;
    if let (true, Some(path)) = (opts.resume, &opts.checkpoint) {
        if let Some(ck) = read_checkpoint(path)? {
            if ck.manifest_sha256 != digest {
                return Err(ReplayError::CheckpointMismatch {
                    expected: digest,
                    found: ck.manifest_sha256,
                });
            }
            if ck.last_applied_batch.is_some_and(|b| b > manifest.batch_count) {
                return Err(ReplayError::BadCheckpoint {
                    path: path.clone(),
                    message: format!("batch index beyond the {} batches of the workload", manifest.batch_count),
                });
            }
            start = steps_done(&all, &ck);
            resumed_after = ck.last_applied_batch;
        }
    }
    if start == 0 && opts.create_schema {
        let create = read_text(&dir.join("create.sql"))?;
        target.init_schema(&create).map_err(|source| ReplayError::Target {
            index: 0,
            file: "create.sql".into(),
            source,
        })?;
    }

    let first_ts = |i: usize| manifest.batches.get(i.wrapping_sub(1)).map(|b| b.first_timestamp);
    let mut report = ReplayReport {
        manifest_sha256: digest.clone(),
        resumed_after,
        applied: Vec::new(),
        last_applied_batch: resumed_after,
        complete: false,
    };
    let mut previous: Option<usize> = None;
    for step in &all[start..] {
        let mut slept_ms = 0.0;
        // Pacing precedes the first file of batch i >= 2 when batch i - 1
        // was applied in this run.
        let opens_batch = previous.is_some_and(|p| p != step.index) && step.index >= 2;
        if let (PaceMode::Realtime { scale }, true) = (opts.pace, opens_batch) {
            if let (Some(prev), Some(cur)) = (first_ts(step.index - 1), first_ts(step.index)) {
                let d = Duration::from_secs_f64(cur.saturating_sub(prev) as f64 / scale);
                sleeper.sleep(d);
                slept_ms = d.as_secs_f64() * 1000.0;
            }
        }
        previous = Some(step.index);

        let batch = if target.wants_ops() {
            read_batch(dir, &step.file)?
        } else {
            Batch {
                kind: if step.index == 0 {
                    BatchKind::Load
                } else if step.completes {
                    BatchKind::Upsert
                } else {
                    BatchKind::Expire
                },
                index: step.index,
                block_range: (0, 0),
                ops: Vec::new(),
            }
        };
        let sql = if target.wants_ops() {
            String::new()
        } else {
            read_text(&dir.join(&step.file))?
        };
        let t = Instant::now();
        target.apply(&batch, &sql).map_err(|e| match e {
            ExecError::Statement { ordinal, message } => ReplayError::Statement {
                index: step.index,
                file: step.file.clone(),
                ordinal,
                message,
            },
            source => ReplayError::Target {
                index: step.index,
                file: step.file.clone(),
                source,
            },
        })?;
        let apply_ms = t.elapsed().as_secs_f64() * 1000.0;
        report.applied.push(AppliedFile {
            state: state_label(step.index),
            file: step.file.clone(),
            kind: batch.kind,
            index: step.index,
            ops: batch.ops.len(),
            apply_ms,
            slept_ms,
        });
        if step.completes {
            report.last_applied_batch = Some(step.index);
        }
        if let Some(path) = &opts.checkpoint {
            write_checkpoint(
                path,
                &ReplayCheckpoint {
                    manifest_sha256: digest.clone(),
                    last_applied_batch: report.last_applied_batch,
                    expire_applied: !step.completes,
                    applied_at_unix_ms: now_ms(),
                },
            )?;
        }
        if step.completes {
            run_hooks(hooks, target, step.index)?;
            if opts.stop_after == Some(step.index) {
                return Ok(report);
            }
        }
    }
    report.complete = true;
    Ok(report)
}
