//! Target selection from a JSON configuration document.

use serde::{Deserialize, Serialize};

use super::driver::{ReplayTarget, SqlTarget};
use super::executor::{CapsOverride, ExecError};
use super::psql::PsqlExecutor;
use super::stub::SqlStub;
use crate::memstore::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Memstore,
    SqlStub,
    Psql,
}

impl TargetKind {
    /// Whether applied state outlives the process, which resuming from a
    /// checkpoint in a later run requires.
    pub fn persistent(self) -> bool {
        matches!(self, TargetKind::Psql)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub target: TargetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<String>,
    #[serde(default)]
    pub capabilities: CapsOverride,
}

impl TargetConfig {
    pub fn memstore() -> Self {
        TargetConfig {
            target: TargetKind::Memstore,
            connection: None,
            capabilities: CapsOverride::default(),
        }
    }

    /// Opens the target; `psql` targets are probed before returning.
    pub fn open(&self) -> Result<Box<dyn ReplayTarget>, ExecError> {
        match self.target {
            TargetKind::Memstore => Ok(Box::new(Store::new())),
            TargetKind::SqlStub => Ok(Box::new(SqlTarget::new(Box::new(SqlStub::new())))),
            TargetKind::Psql => {
                let conn = self
                    .connection
                    .as_deref()
                    .ok_or_else(|| ExecError::Connection("psql target requires a connection string".into()))?;
                let mut t = SqlTarget::new(Box::new(PsqlExecutor::connect(conn)?));
                t.caps = t.caps.restricted_by(&self.capabilities);
                Ok(Box::new(t))
            }
        }
    }
}
