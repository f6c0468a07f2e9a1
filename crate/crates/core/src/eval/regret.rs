//! Plan-regret matrices: cost of running the plan chosen for one state on
//! another state, relative to that state's own plan.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Ratios within this distance of 1 render as a tie.
pub const TIE_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Optimizer-estimated cost.
    Ce,
    /// Measured median latency in milliseconds.
    Cr,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ce" => Ok(Metric::Ce),
            "cr" => Ok(Metric::Cr),
            other => Err(format!("unknown metric {other:?} (expected ce or cr)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Ce => "ce",
            Metric::Cr => "cr",
        })
    }
}

/// Cost of the plan optimized for state `plan` when run on state `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMeasurement {
    pub plan: String,
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cr_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
}

impl PlanMeasurement {
    pub fn value(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Ce => self.ce,
            Metric::Cr => self.cr_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Speedup,
    Regression,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretCell {
    /// `C(P(x), y) / C(P(y), y)`.
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub direction: Direction,
}

impl RegretCell {
    /// Factor shown to readers: the ratio or its reciprocal, whichever is
    /// at least 1.
    pub fn magnitude(&self) -> f64 {
        self.ratio.max(1.0 / self.ratio)
    }

    pub fn label(&self) -> String {
        let arrow = match self.direction {
            Direction::Speedup => "↑",
            Direction::Regression => "↓",
            Direction::Tie => "",
        };
        let mag = if self.direction == Direction::Tie { 1.0 } else { self.magnitude() };
        format!("{arrow}{mag:.2}×")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretMatrix {
    pub metric: Metric,
    /// Row `i` is the plan for `labels[i]`; column `j` is state `labels[j]`.
    pub labels: Vec<String>,
    /// Diagonal cells are `None`.
    pub cells: Vec<Vec<Option<RegretCell>>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegretError {
    #[error("missing {metric} measurement for plan P({plan}) on {state}")]
    Missing { metric: Metric, plan: String, state: String },
    #[error("non-positive {metric} measurement for plan P({plan}) on {state}")]
    NonPositive { metric: Metric, plan: String, state: String },
    #[error("no measurements")]
    Empty,
}

fn direction(ratio: f64) -> Direction {
    if (ratio - 1.0).abs() < TIE_TOLERANCE {
        Direction::Tie
    } else if ratio < 1.0 {
        Direction::Speedup
    } else {
        Direction::Regression
    }
}

/// Builds the matrix over all states named in `ms`, in order of first
/// appearance.
pub fn regret_matrix(ms: &[PlanMeasurement], metric: Metric) -> Result<RegretMatrix, RegretError> {
    let mut labels: Vec<String> = Vec::new();
    for m in ms {
        for l in [&m.plan, &m.state] {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    if labels.is_empty() {
        return Err(RegretError::Empty);
    }
    let mut by_pair: HashMap<(&str, &str), f64> = HashMap::new();
    for m in ms {
        if let Some(v) = m.value(metric) {
            by_pair.insert((m.plan.as_str(), m.state.as_str()), v);
        }
    }
    let get = |plan: &str, state: &str| -> Result<f64, RegretError> {
        let v = *by_pair.get(&(plan, state)).ok_or_else(|| RegretError::Missing {
            metric,
            plan: plan.to_string(),
            state: state.to_string(),
        })?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(RegretError::NonPositive {
                metric,
                plan: plan.to_string(),
                state: state.to_string(),
            })
        }
    };
    let mut cells = Vec::with_capacity(labels.len());
    for x in &labels {
        let mut row = Vec::with_capacity(labels.len());
        for y in &labels {
            if x == y {
                row.push(None);
                continue;
            }
            let numerator = get(x, y)?;
            let denominator = get(y, y)?;
            let ratio = numerator / denominator;
            row.push(Some(RegretCell {
                ratio,
                numerator,
                denominator,
                direction: direction(ratio),
            }));
        }
        cells.push(row);
    }
    Ok(RegretMatrix { metric, labels, cells })
}

impl RegretMatrix {
    pub fn cell(&self, plan: &str, state: &str) -> Option<&RegretCell> {
        let i = self.labels.iter().position(|l| l == plan)?;
        let j = self.labels.iter().position(|l| l == state)?;
        self.cells[i][j].as_ref()
    }

    /// CSV with a header row of states and one row per plan; diagonal
    /// cells are `-`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("plan");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, x) in self.labels.iter().enumerate() {
            out.push_str(&format!("P({x})"));
            for c in &self.cells[i] {
                out.push(',');
                match c {
                    Some(c) => out.push_str(&c.label()),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(plan: &str, state: &str, ce: f64, cr: f64) -> PlanMeasurement {
        PlanMeasurement {
            plan: plan.into(),
            state: state.into(),
            ce: Some(ce),
            cr_ms: Some(cr),
            reps: Some(11),
        }
    }

    #[test]
    fn recorded_pair_gives_regression_cells() {
        let ms = vec![m("S1", "S1", 5000.0, 20.0), m("S4", "S4", 6689.42, 17.79), m("S1", "S4", 15701.91, 32.17), m("S4", "S1", 5000.0, 20.0)];
        let ce = regret_matrix(&ms, Metric::Ce).unwrap();
        assert_eq!(ce.cell("S1", "S4").unwrap().label(), "↓2.35×");
        assert_eq!(ce.cell("S4", "S1").unwrap().label(), "1.00×");
        let cr = regret_matrix(&ms, Metric::Cr).unwrap();
        assert_eq!(cr.cell("S1", "S4").unwrap().label(), "↓1.81×");
        assert!(cr.cell("S1", "S1").is_none());
        assert_eq!(ce.to_csv(), "plan,S1,S4\nP(S1),-,↓2.35×\nP(S4),1.00×,-\n");
    }

    #[test]
    fn speedup_shows_reciprocal() {
        let ms = vec![m("A", "A", 1.0, 1.16), m("B", "B", 1.0, 1.0), m("B", "A", 1.0, 1.0), m("A", "B", 1.0, 1.0)];
        let cr = regret_matrix(&ms, Metric::Cr).unwrap();
        let c = cr.cell("B", "A").unwrap();
        assert_eq!(c.direction, Direction::Speedup);
        assert_eq!(c.label(), "↑1.16×");
    }

    #[test]
    fn missing_pair_is_named() {
        let ms = vec![m("S1", "S1", 1.0, 1.0), m("S2", "S2", 1.0, 1.0), m("S1", "S2", 1.0, 1.0)];
        let err = regret_matrix(&ms, Metric::Ce).unwrap_err();
        assert_eq!(err.to_string(), "missing ce measurement for plan P(S2) on S1");
    }

    #[test]
    fn tie_tolerance() {
        assert_eq!(direction(1.004), Direction::Tie);
        assert_eq!(direction(0.996), Direction::Tie);
        assert_eq!(direction(1.006), Direction::Regression);
        assert_eq!(direction(0.99), Direction::Speedup);
    }
}
