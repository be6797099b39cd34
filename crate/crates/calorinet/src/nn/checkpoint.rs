//! Versioned model checkpoints.
//!
//! JSON with shortest-round-trip float formatting, so parameters survive a
//! save/load cycle bit-exactly.

use std::path::Path;

use crate::accel::GravityFilterConfig;
use crate::error::{Error, Result};
use crate::nn::model::Model;
use crate::nn::train::TrainConfig;
use crate::silhouette::TemporalScaleConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything the streaming predictor must replicate to produce the same
/// inputs the model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PipelineConfig {
    pub scale: TemporalScaleConfig,
    pub gravity: GravityFilterConfig,
    /// Accel window length in samples.
    pub accel_len: usize,
    /// Feed raw accelerometer readings instead of gravity-removed ones.
    pub raw_accel: bool,
    /// Frames between consecutive predictions.
    pub stride: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scale: TemporalScaleConfig::default(),
            gravity: GravityFilterConfig::default(),
            accel_len: 1000,
            raw_accel: false,
            stride: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub variant: String,
    pub model: Model,
    pub train_config: TrainConfig,
    pub pipeline: PipelineConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::State(format!("checkpoint serialization failed: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {} (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ckpt)
    }
}
