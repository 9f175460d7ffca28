use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Binary,
    Continuous,
}

/// Column kinds of the observed features `x` and outcomes `y`. The
/// treatment is always a single binary column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSchema {
    pub feature_kinds: Vec<Kind>,
    pub outcome_kinds: Vec<Kind>,
}

impl DataSchema {
    pub fn new(feature_kinds: Vec<Kind>, outcome_kinds: Vec<Kind>) -> Result<Self> {
        let s = Self {
            feature_kinds,
            outcome_kinds,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn continuous(x_dim: usize, y_dim: usize) -> Self {
        Self {
            feature_kinds: vec![Kind::Continuous; x_dim],
            outcome_kinds: vec![Kind::Continuous; y_dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_kinds.is_empty() {
            return Err(Error::config("schema.feature_kinds", "need at least one feature"));
        }
        if self.outcome_kinds.is_empty() {
            return Err(Error::config("schema.outcome_kinds", "need at least one outcome"));
        }
        Ok(())
    }

    pub fn x_dim(&self) -> usize {
        self.feature_kinds.len()
    }

    pub fn y_dim(&self) -> usize {
        self.outcome_kinds.len()
    }

    /// Kinds of the concatenated `[x, t, y]` record.
    pub fn record_kinds(&self) -> Vec<Kind> {
        let mut k = self.feature_kinds.clone();
        k.push(Kind::Binary);
        k.extend_from_slice(&self.outcome_kinds);
        k
    }
}
