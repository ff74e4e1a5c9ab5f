//! Pipeline configuration file.
//!
//! A flat TOML document; every key is optional and mirrors the long flag of
//! the same name (dashes become underscores). Command-line flags win over
//! the file. Example:
//!
//! ```toml
//! corpus = "data/en.tsv"
//! lexicon = "data/lexicon.es.tsv"
//! target_lang = "es"
//! backend = "mock"
//! mock_rule = "pronoun-follower"
//! pool_fraction = 0.25
//! selection_seed = 4
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub stereotype_tag: Option<String>,
    pub source_lang: Option<String>,
    pub target_lang: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub translations: Option<PathBuf>,
    pub attr_dir: Option<PathBuf>,
    pub human_translations: Option<PathBuf>,
    pub cache: Option<PathBuf>,

    pub backend: Option<String>,
    pub mock_rule: Option<String>,
    pub endpoint: Option<String>,
    pub max_in_flight: Option<usize>,
    pub max_retries: Option<u32>,

    pub strategy: Option<String>,
    pub num_beams: Option<u32>,
    pub top_k: Option<u32>,
    pub top_p: Option<f64>,
    pub temperature: Option<f64>,
    pub penalty_alpha: Option<f64>,
    pub max_tokens: Option<u32>,
    pub template: Option<String>,

    pub model_seed: Option<u64>,
    pub hidden_size: Option<usize>,
    pub steps: Option<usize>,

    pub pool_fraction: Option<f64>,
    pub exemplars: Option<usize>,
    pub nt_policy: Option<String>,
    pub selection_seed: Option<u64>,
    pub nt_seed: Option<u64>,

    pub resamples: Option<usize>,
    pub sample_fraction: Option<f64>,
    pub bootstrap_seed: Option<u64>,
    pub metric: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
