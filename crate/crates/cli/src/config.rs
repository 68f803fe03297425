use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use repofix_core::llm::GenerationConfig;
use repofix_core::refine::LoopConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderChoice {
    #[default]
    Local,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub project_root: Option<PathBuf>,
    pub database: Option<PathBuf>,
    pub tasks: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

/// Settings file. TOML by default; a `.json` extension selects JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub generation: GenerationConfig,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    /// `remote` or `mock:<transcript.json>`.
    pub backend: Option<String>,
    pub embedder: EmbedderChoice,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        };
        Ok(cfg)
    }
}
