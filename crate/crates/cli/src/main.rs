//! `chainbench`: datasets, update workloads and estimator experiments over
//! Ethereum-shaped ledger data.
//!
//! Exit status: 0 on success, 1 on runtime failure, 2 on usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "chainbench", version, about = "Benchmark harness for evolving ledger databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset and write it as a CSV export.
    Synth(SynthArgs),
    /// Read and validate a CSV export.
    Ingest(IngestArgs),
    /// Extract a closed block-range slice of an export.
    Slice(SliceArgs),
    /// Generate the initial load and upsert/expire batch files.
    GenUpdates(GenUpdatesArgs),
    /// Apply a workload directory to a target.
    Replay(ReplayArgs),
    /// Count or time queries on an export.
    RunQueries(RunQueriesArgs),
    /// Q-errors of every small connected subquery of a query.
    ProbeCard(ProbeCardArgs),
    /// Render a plan-regret matrix from recorded measurements.
    PlanMatrix(PlanMatrixArgs),
    /// Run a full experiment manifest.
    Scenario(ScenarioArgs),
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// JSON generator configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    blocks: Option<u64>,
    #[arg(long)]
    tx_per_block: Option<f64>,
    #[arg(long)]
    gas_drift: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SliceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    lo: u64,
    #[arg(long)]
    hi: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GenUpdatesArgs {
    #[arg(long)]
    input: PathBuf,
    /// Blocks in the initial load.
    #[arg(long)]
    init: u64,
    /// Blocks per batch.
    #[arg(long)]
    granularity: u64,
    /// Pair every upsert batch with an expire batch of the same length.
    #[arg(long)]
    expire: bool,
    #[arg(long, default_value = "postgres")]
    dialect: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ReplayArgs {
    #[arg(long)]
    workload: PathBuf,
    /// JSON target configuration; defaults to the in-memory store.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Pace batches by block timestamps divided by this factor.
    #[arg(long)]
    realtime: Option<f64>,
    /// Checkpoint file; defaults to `replay.ckpt.json` in the output directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue after the batch recorded in the checkpoint.
    #[arg(long)]
    resume: bool,
    /// Do not execute `create.sql` before the load.
    #[arg(long)]
    no_schema: bool,
    /// Stop once this batch index has been applied.
    #[arg(long)]
    stop_after: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RunQueriesArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated query ids; defaults to every query with a countable form.
    #[arg(long, value_delimiter = ',')]
    queries: Vec<String>,
    #[arg(long)]
    query_dir: Option<PathBuf>,
    /// SQL target on which to time query texts (loaded with the export first).
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 11)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    Refreshed,
    Initial,
    Both,
}

#[derive(Args, Debug, Serialize)]
struct ProbeCardArgs {
    /// Export holding the state to probe.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    query_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_tables: usize,
    #[arg(long, value_enum, default_value = "both")]
    policy: PolicyArg,
    /// Probe every state of this workload instead of the export itself.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Keep subqueries whose Q-error stays below 1.01 in the series CSV.
    #[arg(long)]
    keep_accurate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MetricArg {
    Ce,
    Cr,
}

#[derive(Args, Debug, Serialize)]
struct PlanMatrixArgs {
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// JSONL plan measurements.
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ScenarioArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
