use thiserror::Error;

use super::ast::StructuralQuery;
use super::parser::{parse_query, QueryParseError};
use crate::diagnostics::Diagnostic;
use crate::llm::{render_query_prompt, BackendError, CompletionBackend, CompletionRequest, GenerationConfig, PromptKind};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("query rejected: {error}")]
    QueryRejected {
        error: QueryParseError,
        completion: String,
    },
}

/// Pulls the query text out of a completion: fences and a leading
/// `Query:` label are dropped, and the query runs from the first line
/// starting with FROM or SELECT up to the next blank line.
pub fn query_text(completion: &str) -> String {
    let mut lines = Vec::new();
    let mut started = false;
    for raw in completion.lines() {
        let line = raw.trim();
        if line.starts_with("```") {
            if started {
                break;
            }
            continue;
        }
        let line = match line.get(..6) {
            Some(p) if p.eq_ignore_ascii_case("query:") => line[6..].trim_start(),
            _ => line,
        };
        if !started {
            let head = line.split_whitespace().next().unwrap_or("");
            if head.eq_ignore_ascii_case("from") || head.eq_ignore_ascii_case("select") {
                started = true;
            } else {
                continue;
            }
        }
        if line.is_empty() {
            break;
        }
        lines.push(line);
    }
    if lines.is_empty() {
        completion.trim().to_string()
    } else {
        lines.join(" ")
    }
}

/// Asks the backend for one query translating `diag`, then parses it.
pub fn synthesize_query(
    diag: &Diagnostic,
    backend: &dyn CompletionBackend,
    task_id: &str,
    config: &GenerationConfig,
) -> Result<StructuralQuery, SynthesisError> {
    let prompt = render_query_prompt(diag);
    let config = config.with_samples(1);
    let req = CompletionRequest {
        task_id,
        kind: PromptKind::QuerySynthesis,
        prompt: &prompt,
        config: &config,
    };
    let completion = backend.complete(&req)?.into_iter().next().unwrap_or_default();
    parse_query(&query_text(&completion)).map_err(|error| SynthesisError::QueryRejected { error, completion })
}
