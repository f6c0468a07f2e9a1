use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use chainbench_core::chain_model::{validate_dataset, ChainDataset};
use chainbench_core::eval::{
    measure_latency, omit_accurate, read_jsonl, regret_matrix, series_csv, write_jsonl, DriftExperiment, Metric,
    PlanMeasurement, Policy,
};
use chainbench_core::ingest::{extract_slice, read_export, write_export};
use chainbench_core::memstore::Store;
use chainbench_core::queries::{find, load_workload, QueryAsset};
use chainbench_core::replay::{
    replay, Hook, HookContext, PaceMode, ReplayOptions, TargetConfig, ThreadSleeper,
    CHECKPOINT_FILE,
};
use chainbench_core::scenario::{run_scenario, ExperimentManifest, RunRecord, VOLATILE_OUTPUTS};
use chainbench_core::synth::{generate, SynthConfig};
use chainbench_core::workload::{
    gen_initial, generate_workload, render_sql, write_workload, Dialect, WorkloadConfig,
};

use super::{
    Command, GenUpdatesArgs, IngestArgs, MetricArg, PlanMatrixArgs, PolicyArg, ProbeCardArgs, ReplayArgs,
    RunQueriesArgs, ScenarioArgs, SliceArgs, SynthArgs,
};

/// Output files whose contents depend on wall-clock time.
const VOLATILE: [&str; 3] = ["replay-report.json", "latency.jsonl", CHECKPOINT_FILE];

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Slice(a) => slice(a),
        Command::GenUpdates(a) => gen_updates(a),
        Command::Replay(a) => replay_cmd(a),
        Command::RunQueries(a) => run_queries(a),
        Command::ProbeCard(a) => probe_card(a),
        Command::PlanMatrix(a) => plan_matrix(a),
        Command::Scenario(a) => scenario(a),
    }
}

fn record(command: &str, args: &impl Serialize) -> Result<RunRecord> {
    Ok(RunRecord::new(command, serde_json::to_value(args)?))
}

fn finish(mut rec: RunRecord, out: &Path) -> Result<()> {
    let skip: Vec<&str> = VOLATILE.iter().chain(VOLATILE_OUTPUTS.iter()).copied().collect();
    rec.add_outputs(out, &skip)
        .with_context(|| format!("digesting outputs in {}", out.display()))?;
    rec.write(out).with_context(|| format!("writing run record in {}", out.display()))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn read_dataset(dir: &Path) -> Result<ChainDataset> {
    Ok(read_export(dir)
        .with_context(|| format!("reading export {}", dir.display()))?
        .into_dataset())
}

/// The whole dataset as one closed state.
fn load_store(ds: &ChainDataset) -> Result<Store> {
    let cfg = WorkloadConfig {
        init_blocks: ds.blocks.len() as u64,
        granularity: 1,
        expire: false,
    };
    let (load, _) = gen_initial(ds, &cfg)?;
    let mut s = Store::new();
    s.apply(&load)?;
    Ok(s)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<SynthConfig>(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .with_context(|| format!("parsing {}", p.display()))?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.blocks {
        cfg.n_blocks = v;
    }
    if let Some(v) = a.tx_per_block {
        cfg.mean_tx_per_block = v;
    }
    if let Some(v) = a.gas_drift {
        cfg.gas_drift_per_block = v;
    }
    let ds = generate(&cfg)?;
    let m = write_export(&ds, &a.out)?;
    let mut rec = record("synth", &a)?;
    rec.config = serde_json::json!({ "args": rec.config, "synth": cfg });
    rec.seed = Some(cfg.seed);
    if let Some(p) = &a.config {
        rec.add_input(p)?;
    }
    println!("wrote {} blocks to {}", m.row_counts.get("blocks").copied().unwrap_or(0), a.out.display());
    finish(rec, &a.out)
}

#[derive(Serialize)]
struct IngestReport {
    block_range: Option<(u64, u64)>,
    row_counts: std::collections::BTreeMap<&'static str, usize>,
    violations: Vec<String>,
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let v = validate_dataset(&ds);
    create_dir(&a.out)?;
    let report = IngestReport {
        block_range: ds.block_range(),
        row_counts: ds.row_counts(),
        violations: v.violations.iter().map(|x| x.to_string()).collect(),
    };
    write_json(&a.out.join("ingest.json"), &report)?;
    let mut rec = record("ingest", &a)?;
    rec.add_input(&a.input)?;
    finish(rec, &a.out)?;
    for (t, n) in &report.row_counts {
        println!("{t}: {n}");
    }
    ensure!(v.is_clean(), "{} integrity violations (see ingest.json)", v.violations.len());
    Ok(())
}

fn slice(a: SliceArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let s = extract_slice(&ds, a.lo, a.hi)?;
    write_export(&s.dataset, &a.out)?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    let mut rec = record("slice", &a)?;
    rec.add_input(&a.input)?;
    println!("slice [{}, {}]: {} blocks", a.lo, a.hi, s.dataset.blocks.len());
    finish(rec, &a.out)
}

fn gen_updates(a: GenUpdatesArgs) -> Result<()> {
    let dialect: Dialect = a.dialect.parse()?;
    let ds = read_dataset(&a.input)?;
    let cfg = WorkloadConfig {
        init_blocks: a.init,
        granularity: a.granularity,
        expire: a.expire,
    };
    let w = generate_workload(&ds, &cfg)?;
    for warn in &w.warnings {
        eprintln!("warning: {warn}");
    }
    let m = write_workload(&a.out, &w, dialect)?;
    let mut rec = record("gen-updates", &a)?;
    rec.add_input(&a.input)?;
    println!(
        "{} batches{} in {}",
        m.batch_count,
        if a.expire { " with expiration" } else { "" },
        a.out.display()
    );
    finish(rec, &a.out)
}

fn read_target(path: Option<&Path>) -> Result<TargetConfig> {
    match path {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing target configuration {}", p.display())),
        None => Ok(TargetConfig::memstore()),
    }
}

#[derive(Serialize)]
struct FinalState {
    complete: bool,
    last_applied_batch: Option<usize>,
    blocks: Option<(u64, u64)>,
    row_counts: Option<std::collections::BTreeMap<&'static str, usize>>,
}

fn replay_cmd(a: ReplayArgs) -> Result<()> {
    create_dir(&a.out)?;
    let cfg = read_target(a.target.as_deref())?;
    ensure!(
        !a.resume || cfg.target.persistent(),
        "--resume needs a persistent target; the {} target starts empty in every run",
        serde_json::to_value(cfg.target)?.as_str().unwrap_or("configured")
    );
    let mut target = cfg.open().context("opening target")?;
    if let Some(s) = a.realtime {
        ensure!(s > 0.0 && s.is_finite(), "--realtime scale must be positive");
    }
    let opts = ReplayOptions {
        pace: a.realtime.map_or(PaceMode::MaxSpeed, |scale| PaceMode::Realtime { scale }),
        checkpoint: Some(a.checkpoint.clone().unwrap_or_else(|| a.out.join(CHECKPOINT_FILE))),
        resume: a.resume,
        create_schema: !a.no_schema,
        stop_after: a.stop_after,
    };
    let report = replay(target.as_mut(), &a.workload, &opts, &mut [], &mut ThreadSleeper)?;
    write_json(&a.out.join("replay-report.json"), &report)?;
    let state = target.store().map(|s| s.to_dataset());
    write_json(
        &a.out.join("final-state.json"),
        &FinalState {
            complete: report.complete,
            last_applied_batch: report.last_applied_batch,
            blocks: state.as_ref().and_then(|d| d.block_range()),
            row_counts: state.as_ref().map(|d| d.row_counts()),
        },
    )?;
    let mut rec = record("replay", &a)?;
    rec.add_input(&a.workload.join("manifest.json"))?;
    if let Some(t) = &a.target {
        rec.add_input(t)?;
    }
    println!(
        "applied {} files; last batch {:?}{}",
        report.applied.len(),
        report.last_applied_batch,
        if report.complete { "" } else { " (stopped early)" }
    );
    finish(rec, &a.out)
}

#[derive(Serialize)]
struct QueryResult {
    query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_count: Option<u64>,
}

#[derive(Serialize)]
struct LatencyRow {
    query: String,
    median_ms: f64,
    samples_ms: Vec<f64>,
}

fn selected<'a>(assets: &'a [QueryAsset], ids: &[String], with_target: bool) -> Result<Vec<&'a QueryAsset>> {
    if ids.is_empty() {
        return Ok(assets
            .iter()
            .filter(|q| q.spj.is_some() || (with_target && q.sql.is_some()))
            .collect());
    }
    ids.iter().map(|id| Ok(find(assets, id)?)).collect()
}

fn run_queries(a: RunQueriesArgs) -> Result<()> {
    let assets = load_workload(a.query_dir.as_deref())?;
    let ds = read_dataset(&a.input)?;
    let store = load_store(&ds)?;
    let mut target = match &a.target {
        Some(p) => {
            let cfg = read_target(Some(p))?;
            let mut t = cfg.open().context("opening target")?;
            ensure!(t.executor().is_some(), "target {} does not execute SQL", p.display());
            let cfg_load = WorkloadConfig {
                init_blocks: ds.blocks.len() as u64,
                granularity: 1,
                expire: false,
            };
            let (load, _) = gen_initial(&ds, &cfg_load)?;
            t.init_schema(chainbench_core::workload::CREATE_SQL).context("creating schema on target")?;
            t.apply(&load, &render_sql(&load, Dialect::Postgres)).context("loading target")?;
            Some(t)
        }
        None => None,
    };
    let qs = selected(&assets, &a.queries, target.is_some())?;
    ensure!(!qs.is_empty(), "no runnable queries selected");
    create_dir(&a.out)?;
    let mut results = Vec::new();
    let mut latency = Vec::new();
    for q in qs {
        let count = q.spj.as_ref().map(|s| store.count(s)).transpose()?;
        let mut target_count = None;
        if let (Some(t), Some(sql)) = (target.as_mut(), &q.sql) {
            let exec = t.executor().expect("checked above");
            if q.spj.is_some() {
                target_count = Some(exec.query_count(sql).with_context(|| format!("{} on target", q.id))?);
            }
            let r = measure_latency(exec, sql, a.reps).with_context(|| format!("timing {}", q.id))?;
            latency.push(LatencyRow {
                query: q.id.clone(),
                median_ms: r.median_ms,
                samples_ms: r.samples_ms,
            });
        } else if count.is_none() {
            bail!("query {} has no countable form and no SQL target was given", q.id);
        }
        println!(
            "{}: count {}{}",
            q.id,
            count.map_or("-".to_string(), |c| c.to_string()),
            target_count.map_or(String::new(), |c| format!(", target {c}"))
        );
        results.push(QueryResult {
            query: q.id.clone(),
            count,
            target_count,
        });
    }
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &results)?;
    fs::write(a.out.join("results.jsonl"), buf)?;
    if !latency.is_empty() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &latency)?;
        fs::write(a.out.join("latency.jsonl"), buf)?;
    }
    let mut rec = record("run-queries", &a)?;
    rec.add_input(&a.input)?;
    finish(rec, &a.out)?;
    for r in &results {
        if let (Some(c), Some(t)) = (r.count, r.target_count) {
            ensure!(c == t, "{}: in-memory count {c} differs from target count {t}", r.query);
        }
    }
    Ok(())
}

fn probe_card(a: ProbeCardArgs) -> Result<()> {
    let assets = load_workload(a.query_dir.as_deref())?;
    let q = find(&assets, &a.query)?;
    let spj = q
        .spj
        .as_ref()
        .with_context(|| format!("query {} has no select-project-join form", q.id))?;
    let policies = match a.policy {
        PolicyArg::Refreshed => vec![Policy::Refreshed],
        PolicyArg::Initial => vec![Policy::Initial],
        PolicyArg::Both => vec![Policy::Refreshed, Policy::Initial],
    };
    let mut exp = DriftExperiment::new(spj, a.max_tables, &policies)?;
    match &a.workload {
        None => {
            let ds = read_dataset(&a.input)?;
            exp.observe("W1", &load_store(&ds)?)?;
        }
        Some(w) => {
            let mut store = Store::new();
            let mut hooks = [Hook::new("probe", |ctx: &mut HookContext<'_>| {
                let s = ctx.target.store().ok_or("probe needs the in-memory target")?;
                exp.observe(&ctx.state, s).map(drop).map_err(|e| e.to_string())
            })];
            replay(&mut store, w, &ReplayOptions::default(), &mut hooks, &mut ThreadSleeper)?;
        }
    }
    let points = exp.into_points();
    create_dir(&a.out)?;
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &points)?;
    fs::write(a.out.join("qerror.jsonl"), buf)?;
    let shown = if a.keep_accurate { points.clone() } else { omit_accurate(&points) };
    fs::write(a.out.join("series.csv"), series_csv(&shown))?;
    let mut rec = record("probe-card", &a)?;
    rec.add_input(&a.input)?;
    if let Some(w) = &a.workload {
        rec.add_input(&w.join("manifest.json"))?;
    }
    finish(rec, &a.out)?;
    println!("{} Q-error points ({} shown in series.csv)", points.len(), shown.len());
    Ok(())
}

fn plan_matrix(a: PlanMatrixArgs) -> Result<()> {
    let text = fs::read_to_string(&a.measurements).with_context(|| format!("reading {}", a.measurements.display()))?;
    let ms: Vec<PlanMeasurement> =
        read_jsonl(text.as_bytes()).with_context(|| format!("parsing {}", a.measurements.display()))?;
    let metric = match a.metric {
        MetricArg::Ce => Metric::Ce,
        MetricArg::Cr => Metric::Cr,
    };
    let m = regret_matrix(&ms, metric)?;
    let csv = m.to_csv();
    create_dir(&a.out)?;
    fs::write(a.out.join(format!("matrix-{metric}.csv")), &csv)?;
    write_json(&a.out.join(format!("matrix-{metric}.json")), &m)?;
    let mut rec = record("plan-matrix", &a)?;
    rec.add_input(&a.measurements)?;
    finish(rec, &a.out)?;
    print!("{csv}");
    Ok(())
}

fn scenario(a: ScenarioArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let mut m = ExperimentManifest::from_json(&text)?;
    if let Some(o) = &a.out {
        m.output_dir = o.clone();
    }
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let resolved = m.resolved(base);
    let outcome = run_scenario(&resolved)?;
    let mut rec = RunRecord::new("scenario", serde_json::to_value(&m)?);
    if let chainbench_core::scenario::DatasetSource::Synth(c) = &m.source {
        rec.seed = Some(c.seed);
    }
    rec.add_input(&a.manifest)?;
    if let Some(p) = &resolved.measurements {
        rec.add_input(p)?;
    }
    finish(rec, &resolved.output_dir)?;
    println!(
        "{} states, {} Q-error points; reports in {}",
        outcome.states.len(),
        outcome.points,
        resolved.output_dir.display()
    );
    Ok(())
}

