use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

/// Settings read from `--config`; any flag given on the command line wins.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub q: Option<usize>,
    pub min_tokens: Option<usize>,
    pub mode: Option<String>,
    pub clump: Option<f64>,
    pub thresholds: Option<String>,
    pub radius: Option<usize>,
    pub topk: Option<usize>,
    pub bleu_order: Option<usize>,
    pub buckets: Option<String>,
    pub batch_size: Option<usize>,
    pub timeout: Option<f64>,
    pub retries: Option<usize>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_Q: usize = 100;
pub const DEFAULT_MIN_TOKENS: usize = 6;
pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_TOPK: usize = 4;
pub const DEFAULT_BLEU_ORDER: usize = 2;
pub const DEFAULT_THRESHOLD_POINTS: u128 = 50;
