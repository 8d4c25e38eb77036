//! Training checkpoint: agent plus the counters needed to resume.

use std::path::Path;

use anyhow::{Context, Result};
use glycemic_core::controller::Controller;
use glycemic_core::env::ControllerMode;
use glycemic_core::td3::{Td3Agent, TrainerState, AGENT_CHECKPOINT_VERSION};
use serde::{Deserialize, Serialize};

use crate::failure::{fail, Kind};
use crate::output::write_atomic;

pub const TRAINING_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingCheckpoint {
    pub version: u32,
    pub mode: ControllerMode,
    pub trainer: TrainerState,
    pub agent: Td3Agent,
}

/// Borrowing twin of [`TrainingCheckpoint`] with the same layout.
#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u32,
    mode: ControllerMode,
    trainer: TrainerState,
    agent: &'a Td3Agent,
}

#[derive(Deserialize)]
struct Header {
    version: u32,
}

impl TrainingCheckpoint {
    pub fn new(mode: ControllerMode, trainer: TrainerState, agent: Td3Agent) -> Self {
        TrainingCheckpoint {
            version: TRAINING_CHECKPOINT_VERSION,
            mode,
            trainer,
            agent,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Header = serde_json::from_str(text).map_err(|e| fail(Kind::Parse, e.to_string()))?;
        if header.version != TRAINING_CHECKPOINT_VERSION {
            return Err(fail(
                Kind::Version,
                format!(
                    "checkpoint version {} is not supported (expected {TRAINING_CHECKPOINT_VERSION})",
                    header.version
                ),
            ));
        }
        let ck: TrainingCheckpoint = serde_json::from_str(text).map_err(|e| fail(Kind::Parse, e.to_string()))?;
        if ck.agent.version != AGENT_CHECKPOINT_VERSION {
            return Err(fail(
                Kind::Version,
                format!("agent version {} is not supported (expected {AGENT_CHECKPOINT_VERSION})", ck.agent.version),
            ));
        }
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail(Kind::MissingFile, format!("checkpoint {}: {e}", path.display())))?;
        Self::from_json(&text).with_context(|| format!("loading checkpoint {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Self::save_parts(self.mode, self.trainer, &self.agent, path)
    }

    pub fn save_parts(mode: ControllerMode, trainer: TrainerState, agent: &Td3Agent, path: &Path) -> Result<()> {
        let r = CheckpointRef {
            version: TRAINING_CHECKPOINT_VERSION,
            mode,
            trainer,
            agent,
        };
        write_atomic(path, serde_json::to_string(&r)?.as_bytes())
    }

    pub fn controller(&self) -> Result<Controller> {
        Ok(Controller::from_agent(self.mode, &self.agent)?)
    }
}
