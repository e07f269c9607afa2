//! The shared run configuration file (TOML). Command-line flags override
//! the values found here; everything has a default so the file is optional.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub windowing: WindowingConfig,
    #[serde(default)]
    pub nilm: NilmConfig,
    #[serde(default)]
    pub signatures: SignaturesConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowingConfig {
    pub window_len: usize,
    pub offset: usize,
    pub budget: usize,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_len: 1000,
            offset: 35,
            budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NilmConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub split_ratio: f64,
}

impl Default for NilmConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.001,
            split_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignaturesConfig {
    pub max_r: usize,
    pub data_offset: usize,
    pub max_iters: usize,
    pub scale_min: usize,
    pub scale_max: usize,
    pub segment_len: usize,
    pub hop: usize,
    pub out_w: usize,
    pub out_h: usize,
    pub augment_budget: usize,
}

impl Default for SignaturesConfig {
    fn default() -> Self {
        Self {
            max_r: 300,
            data_offset: 150,
            max_iters: usize::MAX,
            scale_min: 1,
            scale_max: 500,
            segment_len: 64,
            hop: 32,
            out_w: 56,
            out_h: 34,
            augment_budget: 1000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.01,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                if !p.exists() {
                    bail!("config file {} does not exist", p.display());
                }
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}
