//! Persisted result formats: JSONL records and figure-ready CSV series.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::qerror::QErrorPoint;

/// Subqueries whose Q-error stays below this at every state may be left
/// out of rendered reports.
pub const ACCURATE_QERROR: f64 = 1.01;

/// One JSON document per line, in input order.
pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads records one per line; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(r: impl BufRead) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

/// Drops every point of a (subquery, policy) series whose Q-error is below
/// [`ACCURATE_QERROR`] at all states.
pub fn omit_accurate(points: &[QErrorPoint]) -> Vec<QErrorPoint> {
    let inaccurate: BTreeSet<(&str, &str)> = points
        .iter()
        .filter(|p| p.qerror >= ACCURATE_QERROR)
        .map(|p| (p.subquery.as_str(), p.policy.name()))
        .collect();
    points
        .iter()
        .filter(|p| inaccurate.contains(&(p.subquery.as_str(), p.policy.name())))
        .cloned()
        .collect()
}

/// CSV with header `state,subquery,policy,estimated,actual,qerror`.
pub fn series_csv(points: &[QErrorPoint]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["state", "subquery", "policy", "estimated", "actual", "qerror"])
        .expect("in-memory write");
    for p in points {
        w.write_record([
            p.state.as_str(),
            p.subquery.as_str(),
            p.policy.name(),
            &format!("{:.4}", p.estimated),
            &p.actual.to_string(),
            &format!("{:.6}", p.qerror),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
