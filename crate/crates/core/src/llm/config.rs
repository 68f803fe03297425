use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_PROMPT_CHAR_BUDGET: usize = 12_000;

/// Sampling parameters sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub temperature: f64,
    /// Top-k sampling cutoff; unset leaves the service default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    pub n_samples: usize,
    pub max_new_tokens: u32,
    /// Characters of rendered prompt allowed; context is cut to fit.
    pub prompt_char_budget: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_k: None,
            n_samples: 1,
            max_new_tokens: 1024,
            prompt_char_budget: DEFAULT_PROMPT_CHAR_BUDGET,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("temperature must be a finite value >= 0, got {0}")]
    Temperature(f64),
    #[error("n_samples must be at least 1")]
    Samples,
    #[error("top_k must be at least 1")]
    TopK,
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.n_samples == 0 {
            return Err(ConfigError::Samples);
        }
        if self.top_k == Some(0) {
            return Err(ConfigError::TopK);
        }
        Ok(())
    }

    pub fn with_samples(&self, n: usize) -> Self {
        Self {
            n_samples: n,
            ..self.clone()
        }
    }
}
