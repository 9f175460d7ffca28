//! JSON model checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CeganModel, DataSchema};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "cegan-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    /// Fingerprint of the training configuration that produced the model.
    pub train_fingerprint: Option<String>,
    pub model: CeganModel,
}

impl Checkpoint {
    pub fn new(model: CeganModel, train_fingerprint: Option<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_owned(),
            train_fingerprint,
            model,
        }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(checkpoint).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; when `expected` is given, rejects a schema that
/// disagrees with it.
pub fn load_checkpoint(path: &Path, expected: Option<&DataSchema>) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint format `{}`",
            path.display(),
            ck.format
        )));
    }
    if let Some(schema) = expected {
        if ck.model.schema() != schema {
            return Err(Error::SchemaMismatch(format!(
                "checkpoint has {} features / {} outcomes ({:?} / {:?}), dataset has {} / {} ({:?} / {:?})",
                ck.model.schema().x_dim(),
                ck.model.schema().y_dim(),
                ck.model.schema().feature_kinds,
                ck.model.schema().outcome_kinds,
                schema.x_dim(),
                schema.y_dim(),
                schema.feature_kinds,
                schema.outcome_kinds,
            )));
        }
    }
    Ok(ck)
}
