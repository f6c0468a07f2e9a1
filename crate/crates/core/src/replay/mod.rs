//! Applying workloads to a target in batch order, with pacing,
//! checkpoints and between-batch hooks.

mod executor;

pub use executor::{CapsOverride, ExecError, PlanDescriptor, ScriptedExecutor, SqlExecutor, SqlExecutorCaps};
mod stub;
pub use stub::{SqlStub, SqlValue};
mod driver;
mod psql;
pub use driver::{
    manifest_digest, read_checkpoint, replay, state_label, AppliedFile, Hook, HookContext, HookFn, PaceMode,
    RecordingSleeper, ReplayCheckpoint, ReplayError, ReplayOptions, ReplayReport, ReplayTarget, Sleeper, SqlTarget,
    ThreadSleeper, CHECKPOINT_FILE,
};
pub use psql::{parse_explain_json, parse_timing_ms, statement_ordinal_at_line, PlanSummary, PsqlExecutor};
mod config;
pub use config::{TargetConfig, TargetKind};
