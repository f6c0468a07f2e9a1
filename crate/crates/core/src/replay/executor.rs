//! SQL execution targets and their optional capabilities.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqlExecutorCaps {
    pub can_estimate_cardinality: bool,
    pub can_report_cost: bool,
    pub can_refresh_stats: bool,
    pub can_pin_plan: bool,
}

/// Partial capability overrides from a target configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapsOverride {
    pub can_estimate_cardinality: Option<bool>,
    pub can_report_cost: Option<bool>,
    pub can_refresh_stats: Option<bool>,
    pub can_pin_plan: Option<bool>,
}

impl SqlExecutorCaps {
    /// Overrides may only withdraw capabilities the target actually has.
    pub fn restricted_by(self, o: &CapsOverride) -> Self {
        let pick = |have: bool, want: Option<bool>| have && want.unwrap_or(have);
        SqlExecutorCaps {
            can_estimate_cardinality: pick(self.can_estimate_cardinality, o.can_estimate_cardinality),
            can_report_cost: pick(self.can_report_cost, o.can_report_cost),
            can_refresh_stats: pick(self.can_refresh_stats, o.can_refresh_stats),
            can_pin_plan: pick(self.can_pin_plan, o.can_pin_plan),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    /// `ordinal` is the 1-based statement number within the submitted text.
    #[error("statement {ordinal}: {message}")]
    Statement { ordinal: usize, message: String },
    #[error("capability not supported by this target: {0}")]
    Unsupported(&'static str),
    #[error("connection: {0}")]
    Connection(String),
    #[error("{0}")]
    Other(String),
}

/// Opaque plan descriptor captured from a target that supports pinning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDescriptor(pub String);

pub trait SqlExecutor {
    fn caps(&self) -> SqlExecutorCaps;

    /// Executes semicolon-separated statements in order.
    fn execute(&mut self, sql: &str) -> Result<(), ExecError>;

    /// Wall-clock time of one execution of `sql`.
    fn execute_timed(&mut self, sql: &str) -> Result<Duration, ExecError> {
        let t = Instant::now();
        self.execute(sql)?;
        Ok(t.elapsed())
    }

    /// Runs a single-row `COUNT(*)` query and returns the count.
    fn query_count(&mut self, _sql: &str) -> Result<u64, ExecError> {
        Err(ExecError::Unsupported("query_count"))
    }

    fn estimate_cardinality(&mut self, _sql: &str) -> Result<f64, ExecError> {
        Err(ExecError::Unsupported("estimate_cardinality"))
    }

    fn plan_cost(&mut self, _sql: &str) -> Result<f64, ExecError> {
        Err(ExecError::Unsupported("plan_cost"))
    }

    fn refresh_stats(&mut self) -> Result<(), ExecError> {
        Err(ExecError::Unsupported("refresh_stats"))
    }

    fn capture_plan(&mut self, _sql: &str) -> Result<PlanDescriptor, ExecError> {
        Err(ExecError::Unsupported("capture_plan"))
    }

    fn execute_pinned(&mut self, _sql: &str, _plan: &PlanDescriptor) -> Result<Duration, ExecError> {
        Err(ExecError::Unsupported("execute_pinned"))
    }
}

/// Executor that replays scripted durations, cycling when exhausted, and
/// records every statement it receives.
#[derive(Debug, Clone, Default)]
pub struct ScriptedExecutor {
    pub durations: Vec<Duration>,
    /// Attempt index (0-based) at which execution fails.
    pub fail_at: Option<usize>,
    pub received: Vec<String>,
    calls: usize,
}

impl ScriptedExecutor {
    pub fn from_millis(ms: &[f64]) -> Self {
        ScriptedExecutor {
            durations: ms.iter().map(|m| Duration::from_secs_f64(m / 1000.0)).collect(),
            ..ScriptedExecutor::default()
        }
    }
}

impl SqlExecutor for ScriptedExecutor {
    fn caps(&self) -> SqlExecutorCaps {
        SqlExecutorCaps::default()
    }

    fn execute(&mut self, sql: &str) -> Result<(), ExecError> {
        self.execute_timed(sql).map(drop)
    }

    fn execute_timed(&mut self, sql: &str) -> Result<Duration, ExecError> {
        let i = self.calls;
        self.calls += 1;
        self.received.push(sql.to_string());
        if self.fail_at == Some(i) {
            return Err(ExecError::Other(format!("scripted failure at call {i}")));
        }
        if self.durations.is_empty() {
            return Ok(Duration::ZERO);
        }
        Ok(self.durations[i % self.durations.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_only_withdraw() {
        let all = SqlExecutorCaps {
            can_estimate_cardinality: true,
            can_report_cost: true,
            can_refresh_stats: true,
            can_pin_plan: false,
        };
        let o = CapsOverride {
            can_report_cost: Some(false),
            can_pin_plan: Some(true),
            ..CapsOverride::default()
        };
        let r = all.restricted_by(&o);
        assert!(r.can_estimate_cardinality && r.can_refresh_stats);
        assert!(!r.can_report_cost);
        assert!(!r.can_pin_plan);
    }

    #[test]
    fn default_capabilities_are_unsupported() {
        let mut e = ScriptedExecutor::default();
        assert_eq!(e.plan_cost("x"), Err(ExecError::Unsupported("plan_cost")));
        assert_eq!(e.refresh_stats(), Err(ExecError::Unsupported("refresh_stats")));
        e.execute("SELECT 1").unwrap();
        assert_eq!(e.received, vec!["SELECT 1".to_string()]);
    }
}
