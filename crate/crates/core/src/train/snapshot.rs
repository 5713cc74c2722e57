use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TaskSpec, TrainConfig, TrainState};
use crate::data::json_error;
use crate::error::{Error, Result};
use crate::model::Model;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

/// Everything needed to evaluate the best model or resume training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    /// Resolved run configuration that produced this snapshot.
    #[serde(default)]
    pub config: serde_json::Value,
    pub train: TrainConfig,
    pub task: TaskSpec,
    pub state: TrainState,
}

impl Snapshot {
    pub fn new(config: serde_json::Value, train: TrainConfig, task: TaskSpec, state: TrainState) -> Self {
        Self { format_version: SNAPSHOT_FORMAT_VERSION, config, train, task, state }
    }

    /// The best validated model, or the latest parameters if none was validated.
    pub fn model(&self) -> &Model {
        self.state.best.as_ref().map_or(&self.state.model, |b| &b.model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        if snap.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(Error::Parse { offset: 0, msg: format!("unsupported format_version {}", snap.format_version) });
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
