//! Versioned flat `key = value` run configuration (TOML syntax).
//!
//! ```toml
//! version = 1
//! seed = 20250101
//! alpha = 0.1
//! lr = 0.03
//! iters = 500
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::sha256_bytes;
use super::{read_file, IoError};
use crate::pretrain::{DecoderConfig, EncoderConfig, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Seeds scene synthesis, model initialization and scene order.
    pub seed: u64,
    /// Synthetic scene size.
    pub height: usize,
    pub width: usize,
    /// Boxcar window for coherency estimation.
    pub window: usize,
    pub alpha: f64,
    pub lr: f64,
    pub iters: usize,
    pub batch: usize,
    pub d: usize,
    pub patch: usize,
    /// Encoder layers.
    pub layers: usize,
    pub decoder_layers: usize,
    /// Probe pairs per scattering query.
    pub queries_m: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        let train = TrainConfig::default();
        Self {
            version: CONFIG_VERSION,
            seed: crate::queries::DEFAULT_SEED,
            height: 32,
            width: 32,
            window: 5,
            alpha: train.alpha,
            lr: train.lr,
            iters: train.iters,
            batch: train.batch,
            d: enc.d,
            patch: enc.patch,
            layers: enc.layers,
            decoder_layers: DecoderConfig::default().layers,
            queries_m: crate::queries::DEFAULT_M,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(IoError::UnsupportedVersion {
                found: cfg.version.min(u16::MAX as u32) as u16,
                supported: CONFIG_VERSION as u16,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let bytes = read_file(path)?;
        Self::parse(&String::from_utf8(bytes).map_err(|e| IoError::Config(e.to_string()))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<(), IoError> {
        self.encoder().validate().map_err(|e| IoError::Config(e.to_string()))?;
        self.train().validate().map_err(|e| IoError::Config(e.to_string()))?;
        if self.window.is_multiple_of(2) {
            return Err(IoError::Config(format!("window must be odd, got {}", self.window)));
        }
        if self.height == 0 || self.width == 0 {
            return Err(IoError::Config("scene size must be positive".into()));
        }
        if self.queries_m == 0 {
            return Err(IoError::Config("queries_m must be >= 1".into()));
        }
        Ok(())
    }

    /// Digest of the canonical serialization.
    pub fn hash(&self) -> String {
        sha256_bytes(self.to_toml().as_bytes())
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig { d: self.d, patch: self.patch, layers: self.layers, seed: self.seed }
    }

    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig { layers: self.decoder_layers }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig { alpha: self.alpha, lr: self.lr, iters: self.iters, batch: self.batch, seed: self.seed }
    }
}
