//! Versioned training checkpoints.
//!
//! Checkpoints are JSON with a fixed field order: `version`, completed
//! `iteration`, the architecture descriptor, the flat parameter vector, the
//! running observation statistics, and the curriculum position. Serialization
//! is deterministic (shortest round-trip float formatting), so identical
//! training states produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ArchSpec, RunningStats};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    /// Completed optimizer iterations; resume continues at this iteration.
    pub iteration: u64,
    pub arch: ArchSpec,
    pub theta: Vec<f64>,
    pub stats: RunningStats,
    pub stage_index: usize,
    /// Iteration at which the current curriculum stage was entered.
    pub stage_entered: u64,
}

impl Checkpoint {
    pub fn initial(arch: &ArchSpec) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            iteration: 0,
            arch: arch.clone(),
            theta: arch.zero_params(),
            stats: RunningStats::new(),
            stage_index: 0,
            stage_entered: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.arch.validate()?;
        let expected = self.arch.param_count();
        if self.theta.len() != expected {
            return Err(Error::CheckpointMismatch(format!(
                "parameter vector has {} entries, architecture needs {expected}",
                self.theta.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
