//! The single run configuration shared by training, evaluation and the CLI.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{BrightnessLevel, DatasetConfig};
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::model::ModelConfig;
use crate::optim::AdamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub adam: AdamConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub max_steps: u64,
    /// `(step, factor)`: from `step` on, the learning rate is multiplied by `factor`.
    pub lr_milestones: Vec<(u64, f64)>,
    pub checkpoint_every: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            adam: AdamConfig::default(),
            lr: 2e-4,
            batch_size: 16,
            max_steps: 1000,
            lr_milestones: Vec::new(),
            checkpoint_every: 500,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be at least 1".into()));
        }
        if self.lr_milestones.iter().any(|&(_, f)| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::Invalid("learning-rate factors must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate used by step `step` (1-based).
    pub fn lr_at(&self, step: u64) -> f64 {
        self.lr_milestones.iter().filter(|&&(s, _)| step >= s).fold(self.lr, |lr, &(_, f)| lr * f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub optim: OptimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            optim: OptimConfig::default(),
        }
    }
}

impl RunConfig {
    /// Small images and networks that train in minutes on one CPU core.
    pub fn desk() -> Self {
        RunConfig {
            dataset: DatasetConfig { height: 64, width: 96, ..DatasetConfig::default() },
            model: ModelConfig::desk(),
            optim: OptimConfig { batch_size: 4, max_steps: 500, ..OptimConfig::default() },
            ..Self::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&body).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.levels.is_empty() {
            return Err(Error::Invalid("at least one brightness level is required".into()));
        }
        for &l in &self.dataset.levels {
            BrightnessLevel::new(l)?;
        }
        if !(self.dataset.split_ratio > 0.0 && self.dataset.split_ratio <= 1.0) {
            return Err(Error::Invalid(format!("split ratio must lie in (0, 1], got {}", self.dataset.split_ratio)));
        }
        self.dataset.noise.validate()?;
        self.model.validate()?;
        let m = self.model.size_multiple();
        if self.dataset.height % m != 0 || self.dataset.width % m != 0 {
            return Err(Error::Invalid(format!(
                "image size {}x{} is not divisible by 2^{} = {m}",
                self.dataset.height, self.dataset.width, self.model.depth
            )));
        }
        self.loss.validate()?;
        if self.loss.flags.use_ssim {
            let need = self.loss.ssim.min_extent();
            if self.dataset.height.min(self.dataset.width) < need {
                return Err(Error::Invalid(format!(
                    "{} SSIM levels need images of at least {need} px per side",
                    self.loss.ssim.levels
                )));
            }
        }
        self.optim.validate()
    }

    /// SHA-256 over the canonical JSON form, leaving out the step budget and checkpoint cadence.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.get_mut("optim").and_then(|o| o.as_object_mut()) {
            o.remove("max_steps");
            o.remove("checkpoint_every");
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
