use serde::{Deserialize, Serialize};

use crate::replay::{ExecError, SqlExecutor};

/// Fewest repetitions a latency measurement may use.
pub const MIN_REPS: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyResult {
    pub median_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatencyError {
    #[error("at least {MIN_REPS} repetitions are required, got {0}")]
    TooFewReps(usize),
    #[error("attempt {attempt}: {source}")]
    Exec {
        attempt: usize,
        #[source]
        source: ExecError,
    },
}

/// Median of `samples`; the lower middle element for even counts.
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Some(s[(s.len() - 1) / 2])
}

/// Runs `sql` `reps` times back to back and reports the median.
pub fn measure_latency(exec: &mut dyn SqlExecutor, sql: &str, reps: usize) -> Result<LatencyResult, LatencyError> {
    if reps < MIN_REPS {
        return Err(LatencyError::TooFewReps(reps));
    }
    let mut samples = Vec::with_capacity(reps);
    for attempt in 0..reps {
        let d = exec
            .execute_timed(sql)
            .map_err(|source| LatencyError::Exec { attempt, source })?;
        samples.push(d.as_secs_f64() * 1000.0);
    }
    Ok(LatencyResult {
        median_ms: median(&samples).expect("reps > 0"),
        samples_ms: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::ScriptedExecutor;

    #[test]
    fn scripted_samples_give_exact_median() {
        let mut e = ScriptedExecutor::from_millis(&[5.0, 3.0, 9.0, 1.0, 7.0, 2.0, 8.0, 4.0, 6.0, 10.0, 11.0]);
        let r = measure_latency(&mut e, "SELECT 1", 11).unwrap();
        assert!((r.median_ms - 6.0).abs() < 1e-9);
        assert_eq!(r.samples_ms.len(), 11);
        let again = measure_latency(&mut e, "SELECT 1", 11).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn enforces_minimum_and_reports_attempt() {
        let mut e = ScriptedExecutor::from_millis(&[1.0]);
        assert_eq!(measure_latency(&mut e, "x", 5), Err(LatencyError::TooFewReps(5)));
        e.fail_at = Some(3);
        match measure_latency(&mut e, "x", 11) {
            Err(LatencyError::Exec { attempt, .. }) => assert_eq!(attempt, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn even_count_takes_lower_middle() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(median(&[]), None);
    }
}
