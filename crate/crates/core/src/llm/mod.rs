//! Prompt rendering, completion backends, and code extraction.

mod backend;
mod config;
mod extract;
mod prompt;

pub use backend::{
    AuditRecord, AuditedBackend, BackendError, CompletionBackend, CompletionRequest, MockBackend, RemoteBackend,
    TranscriptEntry, COMPLETION_KEY_ENV,
};
pub use config::{ConfigError, GenerationConfig, DEFAULT_PROMPT_CHAR_BUDGET, DEFAULT_TEMPERATURE};
pub use extract::{extract_code, ExtractError};
pub use prompt::{
    render_generation_prompt, render_query_prompt, sha256_hex, ContextSnippet, ContextSource, PromptBundle,
    PromptError, PromptKind, PromptSegment, TRUNCATION_MARKER,
};
