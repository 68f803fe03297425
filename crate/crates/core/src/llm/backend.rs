use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::GenerationConfig;
use super::prompt::{PromptBundle, PromptKind};

pub const COMPLETION_KEY_ENV: &str = "REPOFIX_COMPLETION_API_KEY";
pub const COMPLETION_URL_ENV: &str = "REPOFIX_COMPLETION_URL";
pub const COMPLETION_MODEL_ENV: &str = "REPOFIX_COMPLETION_MODEL";

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub task_id: &'a str,
    pub kind: PromptKind,
    pub prompt: &'a PromptBundle,
    pub config: &'a GenerationConfig,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("completion backend unavailable: {0}")]
    Unavailable(String),
    #[error("transcript has no entry {ordinal} for task '{task}'")]
    TranscriptExhausted { task: String, ordinal: usize },
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

/// Anything that turns a prompt into `config.n_samples` completions.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Vec<String>, BackendError>;
    fn name(&self) -> &str;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Vec<String>, BackendError> {
        (**self).complete(req)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptEntry {
    pub ordinal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_prompt_digest: Option<String>,
    pub responses: Vec<String>,
}

/// Replays a recorded transcript. Entries are keyed by `(task, ordinal)`
/// where the ordinal counts requests per task; an entry without a task
/// applies to every task.
#[derive(Debug, Default)]
pub struct MockBackend {
    entries: Vec<TranscriptEntry>,
    counters: Mutex<HashMap<String, usize>>,
    warnings: Mutex<Vec<String>>,
}

impl MockBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        Self {
            entries,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<TranscriptEntry> =
            serde_json::from_str(text).map_err(|e| BackendError::Protocol(format!("transcript: {e}")))?;
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().unwrap().clone()
    }

    fn lookup(&self, task: &str, ordinal: usize) -> Option<&TranscriptEntry> {
        self.entries
            .iter()
            .find(|e| e.ordinal == ordinal && e.task.as_deref() == Some(task))
            .or_else(|| self.entries.iter().find(|e| e.ordinal == ordinal && e.task.is_none()))
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Vec<String>, BackendError> {
        let ordinal = {
            let mut counters = self.counters.lock().unwrap();
            let c = counters.entry(req.task_id.to_string()).or_insert(0);
            let o = *c;
            *c += 1;
            o
        };
        let entry = self
            .lookup(req.task_id, ordinal)
            .ok_or_else(|| BackendError::TranscriptExhausted {
                task: req.task_id.to_string(),
                ordinal,
            })?;
        if let Some(expected) = &entry.expected_prompt_digest {
            let actual = req.prompt.digest();
            if *expected != actual {
                let msg = format!(
                    "prompt digest mismatch for task '{}' ordinal {ordinal}: expected {expected}, got {actual}",
                    req.task_id
                );
                tracing::warn!("{msg}");
                self.warnings.lock().unwrap().push(msg);
            }
        }
        if entry.responses.is_empty() {
            return Err(BackendError::Protocol(format!("transcript entry {ordinal} has no responses")));
        }
        let n = req.config.n_samples.max(1);
        Ok(entry.responses.iter().cycle().take(n).cloned().collect())
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub task_id: String,
    pub kind: PromptKind,
    pub prompt_digest: String,
    pub prompt_chars: usize,
    pub config: GenerationConfig,
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Records every request passing through the inner backend.
pub struct AuditedBackend<B> {
    inner: B,
    log: Mutex<Vec<AuditRecord>>,
}

impl<B: CompletionBackend> AuditedBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.log.lock().unwrap().clone()
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: CompletionBackend> CompletionBackend for AuditedBackend<B> {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Vec<String>, BackendError> {
        let result = self.inner.complete(req);
        let record = AuditRecord {
            task_id: req.task_id.to_string(),
            kind: req.kind,
            prompt_digest: req.prompt.digest(),
            prompt_chars: req.prompt.char_len(),
            config: req.config.clone(),
            responses: result.as_ref().map(Clone::clone).unwrap_or_default(),
            error: result.as_ref().err().map(ToString::to_string),
        };
        self.log.lock().unwrap().push(record);
        result
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Chat-completions style HTTP client.
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: String,
    attempts: u32,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
            model: model.into(),
            api_key: api_key.into(),
            attempts: 3,
        })
    }

    /// Reads the key, endpoint and model from the environment.
    pub fn from_env() -> Result<Self, BackendError> {
        let key = std::env::var(COMPLETION_KEY_ENV)
            .map_err(|_| BackendError::Unavailable(format!("{COMPLETION_KEY_ENV} is not set")))?;
        let url = std::env::var(COMPLETION_URL_ENV)
            .unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".into());
        let model = std::env::var(COMPLETION_MODEL_ENV).unwrap_or_else(|_| "gpt-3.5-turbo".into());
        Self::new(url, model, key)
    }

    fn body(&self, req: &CompletionRequest<'_>) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt.rendered}],
            "temperature": req.config.temperature,
            "n": req.config.n_samples,
            "max_tokens": req.config.max_new_tokens,
        });
        if let Some(k) = req.config.top_k {
            body["top_k"] = k.into();
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<Vec<String>, (bool, BackendError)> {
        let resp = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| (true, BackendError::Unavailable(e.to_string())))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, BackendError::Unavailable(format!("HTTP {status}"))));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| (false, BackendError::Protocol(e.to_string())))?;
        parse_choices(&value).map_err(|e| (false, e))
    }
}

pub(crate) fn parse_choices(value: &serde_json::Value) -> Result<Vec<String>, BackendError> {
    let choices = value
        .get("choices")
        .and_then(|c| c.as_array())
        .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .or_else(|| c.get("text"))
                .and_then(|t| t.as_str())
                .map(str::to_string)
                .ok_or_else(|| BackendError::Protocol("choice without content".into()))
        })
        .collect()
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Vec<String>, BackendError> {
        let body = self.body(req);
        let mut delay = Duration::from_millis(500);
        let mut last = None;
        for i in 0..self.attempts {
            match self.attempt(&body) {
                Ok(v) => return Ok(v),
                Err((true, e)) => {
                    tracing::warn!(attempt = i + 1, "completion request failed: {e}");
                    last = Some(e);
                    if i + 1 < self.attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
                Err((false, e)) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| BackendError::Unavailable("no attempts made".into())))
    }

    fn name(&self) -> &str {
        "remote"
    }
}
