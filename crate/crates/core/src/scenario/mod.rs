//! Experiment manifests and their end-to-end execution: build states,
//! replay, probe between batches and write reports.

mod record;

pub use record::{dir_digest, sha256_hex, RunRecord, RUN_RECORD};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain_model::{ChainDataset, SliceSpec};
use crate::eval::{
    measure_latency, omit_accurate, regret_matrix, series_csv, write_jsonl, DriftExperiment, LatencyResult, Metric,
    PlanMeasurement, Policy, QErrorPoint,
};
use crate::ingest::{extract_slice, read_export};
use crate::memstore::{SpjQuery, Store};
use crate::queries::{find, load_workload, QueryAsset};
use crate::replay::{replay, Hook, HookContext, ReplayOptions, ReplayReport, TargetConfig, TargetKind, ThreadSleeper};
use crate::synth::{generate, SynthConfig};
use crate::workload::{gen_initial, generate_workload, write_workload, Dialect, WorkloadConfig};

/// Files written by a scenario that depend on wall-clock time and are left
/// out of the run record.
pub const VOLATILE_OUTPUTS: [&str; 1] = ["timings.json"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// One moving window replayed batch by batch.
    WindowDrift,
    /// Independent slices compared against each other.
    SliceCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synth(SynthConfig),
    ExportDir(PathBuf),
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::Refreshed, Policy::Initial]
}

fn default_max_tables() -> usize {
    3
}

fn default_reps() -> usize {
    crate::eval::MIN_REPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub kind: ScenarioKind,
    pub source: DatasetSource,
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
    #[serde(default)]
    pub workload: Option<WorkloadConfig>,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    pub queries: Vec<String>,
    #[serde(default = "default_max_tables")]
    pub max_tables: usize,
    /// Extra query files overriding the built-ins.
    #[serde(default)]
    pub query_dir: Option<PathBuf>,
    /// Recorded plan measurements rendered as regret matrices.
    #[serde(default)]
    pub measurements: Option<PathBuf>,
    /// SQL target for latency probes; states are always also built in
    /// memory for exact counts.
    #[serde(default)]
    pub target: Option<TargetConfig>,
    #[serde(default = "default_reps")]
    pub latency_reps: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Step {
        context: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

fn step<E: std::error::Error + Send + Sync + 'static>(context: impl Into<String>) -> impl FnOnce(E) -> ScenarioError {
    let context = context.into();
    move |e| ScenarioError::Step {
        context,
        source: Box::new(e),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    /// Relative paths are taken against `base`, normally the manifest's
    /// directory.
    pub fn resolved(&self, base: &Path) -> ExperimentManifest {
        let mut m = self.clone();
        if let DatasetSource::ExportDir(p) = &m.source {
            m.source = DatasetSource::ExportDir(resolve(base, p));
        }
        m.query_dir = m.query_dir.as_deref().map(|p| resolve(base, p));
        m.measurements = m.measurements.as_deref().map(|p| resolve(base, p));
        m.output_dir = resolve(base, &m.output_dir);
        m
    }

    fn check(&self, assets: &[QueryAsset]) -> Result<Vec<QueryAsset>, ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        match self.kind {
            ScenarioKind::WindowDrift if self.workload.is_none() => return invalid("window-drift needs a workload".into()),
            ScenarioKind::SliceCompare if self.slices.is_empty() => {
                return invalid("slice-compare needs at least one slice".into())
            }
            _ => {}
        }
        if self.queries.is_empty() {
            return invalid("no queries listed".into());
        }
        if self.policies.is_empty() {
            return invalid("no policies listed".into());
        }
        if self.max_tables == 0 {
            return invalid("max_tables must be at least 1".into());
        }
        let sql_target = self.target.as_ref().is_some_and(|t| t.target != TargetKind::Memstore);
        let mut out = Vec::new();
        for id in &self.queries {
            let q = find(assets, id).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            if q.spj.is_none() && !(sql_target && q.sql.is_some()) {
                return invalid(format!(
                    "query {id} has no select-project-join form and no SQL target is configured to run its text"
                ));
            }
            out.push(q.clone());
        }
        Ok(out)
    }
}

/// What a scenario produced. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub states: Vec<String>,
    pub points: usize,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyPoint {
    pub state: String,
    pub query: String,
    pub median_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Default, Serialize)]
struct Timings {
    replay: Option<ReplayReport>,
    target_replay: Option<ReplayReport>,
    latency: Vec<LatencyPoint>,
}

fn load_dataset(src: &DatasetSource) -> Result<ChainDataset, ScenarioError> {
    match src {
        DatasetSource::Synth(cfg) => generate(cfg).map_err(step("synthesizing dataset")),
        DatasetSource::ExportDir(dir) => read_export(dir)
            .map(|r| r.into_dataset())
            .map_err(step(format!("reading export {}", dir.display()))),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<String>) -> Result<(), ScenarioError> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(step(format!("writing {}", p.display())))?;
    files.push(name.to_string());
    Ok(())
}

fn write_points(dir: &Path, id: &str, points: &[QErrorPoint], files: &mut Vec<String>) -> Result<(), ScenarioError> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, points).expect("in-memory write");
    write_file(dir, &format!("qerror-{id}.jsonl"), &buf, files)?;
    write_file(dir, &format!("series-{id}.csv"), series_csv(&omit_accurate(points)).as_bytes(), files)
}

/// Runs a resolved manifest. Reports under `output_dir` are a pure
/// function of the manifest and its inputs, apart from `timings.json`.
pub fn run_scenario(m: &ExperimentManifest) -> Result<ScenarioOutcome, ScenarioError> {
    let assets = load_workload(m.query_dir.as_deref()).map_err(step("loading queries"))?;
    let queries = m.check(&assets)?;
    let out = &m.output_dir;
    fs::create_dir_all(out).map_err(step(format!("creating {}", out.display())))?;
    let ds = load_dataset(&m.source)?;

    let spj: Vec<(&str, &SpjQuery)> = queries.iter().filter_map(|q| Some((q.id.as_str(), q.spj.as_ref()?))).collect();
    let mut experiments: Vec<DriftExperiment> = spj
        .iter()
        .map(|(_, q)| DriftExperiment::new(q, m.max_tables, &m.policies))
        .collect::<Result<_, _>>()
        .map_err(step("preparing drift experiment"))?;
    let mut states = Vec::new();
    let mut timings = Timings::default();
    let mut files = Vec::new();

    match m.kind {
        ScenarioKind::WindowDrift => {
            let cfg = m.workload.expect("checked");
            let w = generate_workload(&ds, &cfg).map_err(step("generating workload"))?;
            let wdir = out.join("workload");
            write_workload(&wdir, &w, Dialect::Postgres).map_err(step("writing workload"))?;
            let mut store = Store::new();
            let mut failure: Option<String> = None;
            {
                let mut hooks = [Hook::new("drift", |ctx: &mut HookContext<'_>| {
                    let store = ctx.target.store().ok_or("drift probe needs an in-memory target")?;
                    for e in experiments.iter_mut() {
                        e.observe(&ctx.state, store).map_err(|e| e.to_string())?;
                    }
                    states.push(ctx.state.clone());
                    Ok(())
                })];
                let opts = ReplayOptions::default();
                match replay(&mut store, &wdir, &opts, &mut hooks, &mut ThreadSleeper) {
                    Ok(r) => timings.replay = Some(r),
                    Err(e) => failure = Some(e.to_string()),
                }
            }
            if let Some(f) = failure {
                return Err(ScenarioError::Invalid(format!("replay failed: {f}")));
            }
            if let Some(t) = m.target.as_ref().filter(|t| t.target != TargetKind::Memstore) {
                let (report, lat) = latency_replay(t, &wdir, &queries, m.latency_reps)?;
                timings.target_replay = Some(report);
                timings.latency = lat;
            }
        }
        ScenarioKind::SliceCompare => {
            for s in &m.slices {
                let slice = extract_slice(&ds, s.lo, s.hi).map_err(step(format!("slicing {}", s.label)))?;
                let load_cfg = WorkloadConfig {
                    init_blocks: slice.dataset.blocks.len() as u64,
                    granularity: 1,
                    expire: false,
                };
                let (load, _) = gen_initial(&slice.dataset, &load_cfg).map_err(step(format!("loading {}", s.label)))?;
                let mut store = Store::new();
                store.apply(&load).map_err(step(format!("loading {}", s.label)))?;
                for e in experiments.iter_mut() {
                    e.observe(&s.label, &store).map_err(step(format!("probing {}", s.label)))?;
                }
                states.push(s.label.clone());
            }
        }
    }

    let mut points = 0;
    for ((id, _), e) in spj.iter().zip(experiments) {
        let pts = e.into_points();
        points += pts.len();
        write_points(out, id, &pts, &mut files)?;
    }
    if let Some(path) = &m.measurements {
        let text = fs::read_to_string(path).map_err(step(format!("reading {}", path.display())))?;
        let ms: Vec<PlanMeasurement> =
            crate::eval::read_jsonl(text.as_bytes()).map_err(step(format!("parsing {}", path.display())))?;
        for metric in [Metric::Ce, Metric::Cr] {
            if ms.iter().any(|x| x.value(metric).is_some()) {
                let mx = regret_matrix(&ms, metric).map_err(step(format!("{metric} matrix")))?;
                write_file(out, &format!("matrix-{metric}.csv"), mx.to_csv().as_bytes(), &mut files)?;
            }
        }
    }
    let mut t = serde_json::to_string_pretty(&timings).expect("timings serialize");
    t.push('\n');
    fs::write(out.join("timings.json"), t).map_err(step("writing timings"))?;
    Ok(ScenarioOutcome { states, points, files })
}

/// Replays the workload onto an external target and measures each query's
/// latency at every state.
fn latency_replay(
    t: &TargetConfig,
    wdir: &Path,
    queries: &[QueryAsset],
    reps: usize,
) -> Result<(ReplayReport, Vec<LatencyPoint>), ScenarioError> {
    let mut target = t.open().map_err(step("opening target"))?;
    let mut lat = Vec::new();
    let report = {
        let mut hooks = [Hook::new("latency", |ctx: &mut HookContext<'_>| {
            let exec = ctx.target.executor().ok_or("latency probe needs a SQL target")?;
            for q in queries {
                let Some(sql) = &q.sql else { continue };
                let LatencyResult { median_ms, samples_ms } =
                    measure_latency(exec, sql, reps).map_err(|e| format!("{}: {e}", q.id))?;
                lat.push(LatencyPoint {
                    state: ctx.state.clone(),
                    query: q.id.clone(),
                    median_ms,
                    samples_ms,
                });
            }
            Ok(())
        })];
        replay(target.as_mut(), wdir, &ReplayOptions::default(), &mut hooks, &mut ThreadSleeper)
            .map_err(step("replaying onto target"))?
    };
    Ok((report, lat))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(out: &Path) -> ExperimentManifest {
        ExperimentManifest::from_json(&format!(
            r#"{{
                "kind": "window-drift",
                "source": {{"synth": {{"seed": 3, "n_blocks": 14, "mean_tx_per_block": 6, "address_pool": 60, "n_tokens": 6}}}},
                "workload": {{"init_blocks": 4, "granularity": 1, "expire": true}},
                "queries": ["Q1"],
                "max_tables": 2,
                "output_dir": "{}"
            }}"#,
            out.display()
        ))
        .unwrap()
    }

    #[test]
    fn window_drift_writes_reports_for_every_state() {
        let d = tempfile::tempdir().unwrap();
        let m = manifest(&d.path().join("out"));
        let o = run_scenario(&m).unwrap();
        assert_eq!(o.states.len(), 11);
        assert_eq!(o.states.first().map(String::as_str), Some("W1"));
        // 5 singles and 4 edges, under two policies, at 11 states.
        assert_eq!(o.points, 9 * 2 * 11);
        assert_eq!(o.files, ["qerror-Q1.jsonl", "series-Q1.csv"]);
        assert!(d.path().join("out/workload/manifest.json").exists());
    }

    #[test]
    fn slice_compare_and_matrices() {
        let d = tempfile::tempdir().unwrap();
        let ms = d.path().join("ms.jsonl");
        fs::write(
            &ms,
            "{\"plan\":\"S1\",\"state\":\"S1\",\"ce\":2.0}\n{\"plan\":\"S2\",\"state\":\"S2\",\"ce\":4.0}\n\
             {\"plan\":\"S1\",\"state\":\"S2\",\"ce\":8.0}\n{\"plan\":\"S2\",\"state\":\"S1\",\"ce\":2.0}\n",
        )
        .unwrap();
        let mut m = manifest(Path::new("out"));
        m.kind = ScenarioKind::SliceCompare;
        m.workload = None;
        m.slices = vec![
            SliceSpec::new(19_005_000, 19_005_004, "S1").unwrap(),
            SliceSpec::new(19_005_008, 19_005_013, "S2").unwrap(),
        ];
        m.measurements = Some("ms.jsonl".into());
        let m = m.resolved(d.path());
        let o = run_scenario(&m).unwrap();
        assert_eq!(o.states, ["S1", "S2"]);
        let csv = fs::read_to_string(d.path().join("out/matrix-ce.csv")).unwrap();
        assert_eq!(csv, "plan,S1,S2\nP(S1),-,↓2.00×\nP(S2),1.00×,-\n");
        assert!(!d.path().join("out/matrix-cr.csv").exists());
    }

    #[test]
    fn invalid_manifests_are_rejected() {
        let d = tempfile::tempdir().unwrap();
        let mut m = manifest(d.path());
        m.queries = vec!["Q2".into()];
        let e = run_scenario(&m).unwrap_err();
        assert!(e.to_string().contains("no select-project-join form"), "{e}");
        m.queries = vec!["Q404".into()];
        assert!(run_scenario(&m).unwrap_err().to_string().contains("unknown query id"));
        m.queries = vec!["Q1".into()];
        m.workload = None;
        assert!(run_scenario(&m).unwrap_err().to_string().contains("needs a workload"));
        assert!(ExperimentManifest::from_json(r#"{"kind":"window-drift","bogus":1}"#).is_err());
    }
}
