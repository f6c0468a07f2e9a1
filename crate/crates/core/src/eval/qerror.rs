use serde::{Deserialize, Serialize};

/// Statistics policy across states: rebuilt per state, or frozen at the
/// first state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Refreshed,
    Initial,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Refreshed => "refreshed",
            Policy::Initial => "initial",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "refreshed" => Ok(Policy::Refreshed),
            "initial" => Ok(Policy::Initial),
            other => Err(format!("unknown policy {other:?} (expected refreshed or initial)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QErrorPoint {
    pub state: String,
    pub subquery: String,
    pub policy: Policy,
    pub estimated: f64,
    pub actual: u64,
    pub qerror: f64,
}

/// `max(e, a) / min(e, a)` with both operands first raised to at least 1.
pub fn qerror(estimated: f64, actual: u64) -> f64 {
    let e = if estimated.is_nan() { 1.0 } else { estimated.max(1.0) };
    let a = (actual as f64).max(1.0);
    e.max(a) / e.min(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(qerror(100.0, 100), 1.0);
        assert_eq!(qerror(0.0, 0), 1.0);
        assert_eq!(qerror(0.3, 1), 1.0);
        assert!((qerror(287.0, 50) - 5.74).abs() < 1e-12);
        assert!((qerror(50.0, 287) - 5.74).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_at_least_one(a in 0u64..1_000_000_000, b in 0u64..1_000_000_000) {
            let q = qerror(a as f64, b);
            prop_assert!(q >= 1.0);
            prop_assert_eq!(q, qerror(b as f64, a));
        }
    }
}
