//! PostgreSQL target driven through the `psql` client binary.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Duration;

use super::executor::{ExecError, SqlExecutor, SqlExecutorCaps};

#[derive(Debug, Clone)]
pub struct PsqlExecutor {
    pub program: String,
    pub connection: String,
    caps: SqlExecutorCaps,
}

struct Output {
    stdout: String,
}

impl PsqlExecutor {
    /// Checks that the server answers before returning the executor.
    pub fn connect(connection: &str) -> Result<Self, ExecError> {
        let mut e = PsqlExecutor {
            program: "psql".to_string(),
            connection: connection.to_string(),
            caps: SqlExecutorCaps {
                can_estimate_cardinality: true,
                can_report_cost: true,
                can_refresh_stats: true,
                can_pin_plan: false,
            },
        };
        e.run("SELECT 1;", true).map_err(|err| match err {
            ExecError::Statement { message, .. } => ExecError::Connection(message),
            other => other,
        })?;
        Ok(e)
    }

    fn run(&mut self, sql: &str, tuples_only: bool) -> Result<Output, ExecError> {
        let mut cmd = Command::new(&self.program);
        cmd.args(["-X", "-q", "-v", "ON_ERROR_STOP=1", "-d", &self.connection]);
        if tuples_only {
            cmd.arg("-At");
        }
        cmd.args(["-f", "-"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let mut child = cmd
            .spawn()
            .map_err(|e| ExecError::Connection(format!("cannot start {}: {e}", self.program)))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(sql.as_bytes())
            .map_err(|e| ExecError::Connection(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| ExecError::Connection(e.to_string()))?;
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        if out.status.success() {
            return Ok(Output { stdout });
        }
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        match error_line(&stderr) {
            Some((line, message)) => Err(ExecError::Statement {
                ordinal: statement_ordinal_at_line(sql, line),
                message,
            }),
            None => Err(ExecError::Connection(stderr.trim().to_string())),
        }
    }

    fn explain(&mut self, sql: &str) -> Result<PlanSummary, ExecError> {
        let body = sql.trim().trim_end_matches(';');
        let out = self.run(&format!("EXPLAIN (FORMAT JSON) {body};"), true)?;
        parse_explain_json(&out.stdout).map_err(ExecError::Other)
    }
}

impl SqlExecutor for PsqlExecutor {
    fn caps(&self) -> SqlExecutorCaps {
        self.caps
    }

    fn execute(&mut self, sql: &str) -> Result<(), ExecError> {
        self.run(sql, false).map(drop)
    }

    /// Server-side time as reported by `\timing`, summed over statements.
    fn execute_timed(&mut self, sql: &str) -> Result<Duration, ExecError> {
        let out = self.run(&format!("\\timing on\n{sql}"), false)?;
        let ms = parse_timing_ms(&out.stdout).ok_or_else(|| ExecError::Other("no timing reported".into()))?;
        Ok(Duration::from_secs_f64(ms / 1000.0))
    }

    fn query_count(&mut self, sql: &str) -> Result<u64, ExecError> {
        let out = self.run(sql, true)?;
        let text = out.stdout.trim();
        text.parse().map_err(|_| ExecError::Other(format!("expected a count, got {text:?}")))
    }

    fn estimate_cardinality(&mut self, sql: &str) -> Result<f64, ExecError> {
        Ok(self.explain(sql)?.rows)
    }

    fn plan_cost(&mut self, sql: &str) -> Result<f64, ExecError> {
        Ok(self.explain(sql)?.total_cost)
    }

    fn refresh_stats(&mut self) -> Result<(), ExecError> {
        self.execute("ANALYZE;")
    }
}

/// Root-node figures of an `EXPLAIN (FORMAT JSON)` result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSummary {
    pub rows: f64,
    pub total_cost: f64,
}

pub fn parse_explain_json(text: &str) -> Result<PlanSummary, String> {
    let v: serde_json::Value = serde_json::from_str(text.trim()).map_err(|e| format!("EXPLAIN output is not JSON: {e}"))?;
    let plan = v
        .get(0)
        .and_then(|x| x.get("Plan"))
        .ok_or("EXPLAIN output has no Plan node")?;
    let num = |k: &str| plan.get(k).and_then(serde_json::Value::as_f64).ok_or(format!("Plan node lacks {k:?}"));
    Ok(PlanSummary {
        rows: num("Plan Rows")?,
        total_cost: num("Total Cost")?,
    })
}

/// Sum of all `Time: <ms> ms` lines.
pub fn parse_timing_ms(stdout: &str) -> Option<f64> {
    let times: Vec<f64> = stdout
        .lines()
        .filter_map(|l| l.trim().strip_prefix("Time: "))
        .filter_map(|r| r.split_whitespace().next()?.parse().ok())
        .collect();
    (!times.is_empty()).then(|| times.iter().sum())
}

/// First `psql:<file>:<line>: ERROR:` report in `stderr`.
fn error_line(stderr: &str) -> Option<(usize, String)> {
    for l in stderr.lines() {
        let Some(rest) = l.strip_prefix("psql:") else { continue };
        let mut parts = rest.splitn(3, ':');
        let (_file, line, msg) = (parts.next()?, parts.next()?, parts.next()?);
        if let Ok(n) = line.parse() {
            return Some((n, msg.trim().to_string()));
        }
    }
    None
}

/// 1-based number of the statement that starts on or spans `line`, counting
/// `;` terminators outside quoted literals before that line.
pub fn statement_ordinal_at_line(sql: &str, line: usize) -> usize {
    let mut ordinal = 1;
    let mut in_quote = false;
    for (i, text) in sql.lines().enumerate() {
        if i + 1 >= line {
            break;
        }
        for c in text.chars() {
            match c {
                '\'' => in_quote = !in_quote,
                ';' if !in_quote => ordinal += 1,
                _ => {}
            }
        }
    }
    ordinal
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPLAIN_FIXTURE: &str = r#"[
  {
    "Plan": {
      "Node Type": "Aggregate",
      "Strategy": "Plain",
      "Startup Cost": 15701.90,
      "Total Cost": 15701.91,
      "Plan Rows": 1,
      "Plan Width": 8,
      "Plans": [{"Node Type": "Hash Join", "Total Cost": 15700.0, "Plan Rows": 287}]
    }
  }
]"#;

    #[test]
    fn explain_root_figures() {
        let s = parse_explain_json(EXPLAIN_FIXTURE).unwrap();
        assert_eq!(s, PlanSummary { rows: 1.0, total_cost: 15701.91 });
        assert!(parse_explain_json("[{}]").is_err());
    }

    #[test]
    fn timing_lines_sum() {
        let out = "Timing is on.\nTime: 1.250 ms\n count\nTime: 30.5 ms (00:00.031)\n";
        assert_eq!(parse_timing_ms(out), Some(31.75));
        assert_eq!(parse_timing_ms("nothing"), None);
    }

    #[test]
    fn error_line_maps_to_statement() {
        let sql = "BEGIN;\nINSERT INTO t VALUES ('a;b');\nDELETE FROM t;\nCOMMIT;\n";
        let stderr = "psql:<stdin>:3: ERROR:  permission denied\n";
        let (line, msg) = error_line(stderr).unwrap();
        assert_eq!(line, 3);
        assert_eq!(msg, "ERROR:  permission denied");
        assert_eq!(statement_ordinal_at_line(sql, line), 3);
        assert_eq!(statement_ordinal_at_line(sql, 1), 1);
    }

    #[test]
    fn missing_binary_is_a_connection_error() {
        let mut e = PsqlExecutor {
            program: "/nonexistent/psql".into(),
            connection: "postgres://localhost/x".into(),
            caps: SqlExecutorCaps::default(),
        };
        assert!(matches!(e.execute("SELECT 1;"), Err(ExecError::Connection(_))));
    }
}
