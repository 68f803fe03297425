use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::EmbeddingVector;
use crate::par;

pub const DEFAULT_LOCAL_DIM: usize = 512;
pub const DEFAULT_LOCAL_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Local,
    Remote,
}

/// Parameters recorded in the database header so query-time encoding can
/// reproduce index-time encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderInfo {
    pub kind: EmbedderKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("encoder unavailable: {0}")]
    EncoderUnavailable(String),
    #[error("encoder returned {got} dimensions, expected {expected}")]
    WrongDimension { expected: usize, got: usize },
    #[error("encoder returned a non-finite component")]
    NonFinite,
}

pub trait Encoder: Send + Sync {
    fn info(&self) -> EmbedderInfo;

    fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError>;

    /// Position-stable batch encoding; one result per input text.
    fn encode_batch(&self, texts: &[String]) -> Vec<Result<EmbeddingVector, EncodeError>> {
        par::map(texts, |t| self.encode(t))
    }
}

/// Lowercased word tokens: alphanumeric runs split further at `_` and
/// camel-case boundaries. A compound identifier also yields itself.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
    {
        let parts = split_identifier(word);
        if parts.len() > 1 {
            let whole: String = word.chars().filter(|c| *c != '_').collect();
            out.push(whole.to_lowercase());
        }
        out.extend(parts);
    }
    out
}

fn split_identifier(word: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for chunk in word.split('_').filter(|c| !c.is_empty()) {
        let chars: Vec<char> = chunk.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0
                && c.is_uppercase()
                && (chars[i - 1].is_lowercase()
                    || chars[i - 1].is_ascii_digit()
                    || (chars[i - 1].is_uppercase()
                        && chars.get(i + 1).is_some_and(|n| n.is_lowercase())));
            if boundary && !cur.is_empty() {
                parts.push(std::mem::take(&mut cur).to_lowercase());
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            parts.push(cur.to_lowercase());
        }
    }
    parts
}

/// Deterministic offline embedder: signed feature hashing of token counts
/// into `dim` buckets, L2-normalized.
#[derive(Debug, Clone)]
pub struct LocalEncoder {
    dim: usize,
    seed: u64,
}

impl LocalEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    pub fn from_info(info: &EmbedderInfo) -> Self {
        Self::new(info.dim, info.seed.unwrap_or(DEFAULT_LOCAL_SEED))
    }
}

impl Default for LocalEncoder {
    fn default() -> Self {
        Self::new(DEFAULT_LOCAL_DIM, DEFAULT_LOCAL_SEED)
    }
}

impl Encoder for LocalEncoder {
    fn info(&self) -> EmbedderInfo {
        EmbedderInfo {
            kind: EmbedderKind::Local,
            dim: self.dim,
            seed: Some(self.seed),
            model: None,
        }
    }

    fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError> {
        let mut v = vec![0.0f64; self.dim];
        for tok in tokenize(text) {
            let h = xxh3_64_with_seed(tok.as_bytes(), self.seed);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(EmbeddingVector::new(v))
    }
}

/// Client for an HTTP embedding service speaking
/// `POST {model, input: [texts]} -> {data: [{embedding: [..]}]}`.
pub struct RemoteEncoder {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    dim: usize,
    batch_size: usize,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

const REMOTE_ATTEMPTS: u32 = 3;

pub const EMBEDDING_KEY_ENV: &str = "REPOFIX_EMBEDDING_API_KEY";
pub const EMBEDDING_URL_ENV: &str = "REPOFIX_EMBEDDING_URL";
pub const EMBEDDING_MODEL_ENV: &str = "REPOFIX_EMBEDDING_MODEL";

impl RemoteEncoder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>, dim: usize) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("tls backend available");
        Self {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            dim,
            batch_size: 64,
        }
    }

    /// Key, endpoint and model from the environment.
    pub fn from_env(dim: usize) -> Result<Self, EncodeError> {
        let key = std::env::var(EMBEDDING_KEY_ENV)
            .map_err(|_| EncodeError::EncoderUnavailable(format!("{EMBEDDING_KEY_ENV} is not set")))?;
        let url = std::env::var(EMBEDDING_URL_ENV).unwrap_or_else(|_| "https://api.openai.com/v1/embeddings".into());
        let model = std::env::var(EMBEDDING_MODEL_ENV).unwrap_or_else(|_| "text-embedding-ada-002".into());
        Ok(Self::new(url, model, key, dim))
    }

    fn request(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EncodeError> {
        let body = EmbeddingRequest {
            model: &self.model,
            input: texts,
        };
        let mut last = String::new();
        for attempt in 0..REMOTE_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << attempt));
            }
            let resp = self
                .client
                .post(&self.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            match resp {
                Ok(r) if r.status().is_success() => {
                    let parsed: EmbeddingResponse = r
                        .json()
                        .map_err(|e| EncodeError::EncoderUnavailable(e.to_string()))?;
                    if parsed.data.len() != texts.len() {
                        return Err(EncodeError::EncoderUnavailable(format!(
                            "service returned {} embeddings for {} inputs",
                            parsed.data.len(),
                            texts.len()
                        )));
                    }
                    return parsed
                        .data
                        .into_iter()
                        .map(|d| self.check(EmbeddingVector::new(d.embedding)))
                        .collect();
                }
                Ok(r) if r.status().is_server_error() || r.status().as_u16() == 429 => {
                    last = format!("HTTP {}", r.status());
                }
                Ok(r) => {
                    return Err(EncodeError::EncoderUnavailable(format!("HTTP {}", r.status())))
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(EncodeError::EncoderUnavailable(last))
    }

    fn check(&self, v: EmbeddingVector) -> Result<EmbeddingVector, EncodeError> {
        if v.dim() != self.dim {
            return Err(EncodeError::WrongDimension {
                expected: self.dim,
                got: v.dim(),
            });
        }
        if !v.is_finite() {
            return Err(EncodeError::NonFinite);
        }
        Ok(v)
    }
}

impl Encoder for RemoteEncoder {
    fn info(&self) -> EmbedderInfo {
        EmbedderInfo {
            kind: EmbedderKind::Remote,
            dim: self.dim,
            seed: None,
            model: Some(self.model.clone()),
        }
    }

    fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError> {
        let mut v = self.request(&[text.to_string()])?;
        Ok(v.remove(0))
    }

    fn encode_batch(&self, texts: &[String]) -> Vec<Result<EmbeddingVector, EncodeError>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            match self.request(chunk) {
                Ok(vs) => out.extend(vs.into_iter().map(Ok)),
                // retry one by one so a single bad input only loses itself
                Err(_) => out.extend(chunk.iter().map(|t| self.encode(t))),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_identifiers() {
        assert_eq!(tokenize("get_handler"), vec!["gethandler", "get", "handler"]);
        assert_eq!(tokenize("AsyncBolt3"), vec!["asyncbolt3", "async", "bolt3"]);
        assert_eq!(tokenize("HTTPServer x"), vec!["httpserver", "http", "server", "x"]);
        assert!(tokenize("  ,; ").is_empty());
    }

    #[test]
    fn local_encoding_is_deterministic_and_unit_norm() {
        let enc = LocalEncoder::default();
        let a = enc.encode("Return Bolt protocol handlers").unwrap();
        let b = enc.encode("Return Bolt protocol handlers").unwrap();
        assert_eq!(a, b);
        let norm = a.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn tokenless_text_encodes_to_zero() {
        let v = LocalEncoder::new(8, 1).encode("++").unwrap();
        assert!(v.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn seed_changes_projection() {
        let a = LocalEncoder::new(64, 1).encode("alpha beta").unwrap();
        let b = LocalEncoder::new(64, 2).encode("alpha beta").unwrap();
        assert_ne!(a, b);
    }
}
