use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{CheckReport, Diagnostic};
use crate::semantic::ScoredEntry;
use crate::span::LineSpan;

/// One generation problem: write the code occupying `insertion_span` of
/// `target_file`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationTask {
    pub id: String,
    pub requirement: String,
    pub target_file: String,
    pub insertion_span: LineSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature_stub: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_command: Option<String>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("task file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("task '{id}': {message}")]
    Invalid { id: String, message: String },
}

impl GenerationTask {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io { path: p.clone(), source })?;
        Self::from_json(&text).map_err(|source| TaskError::Json { path: p, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerChoice {
    #[default]
    External,
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_iterations: u32,
    pub n_candidates: usize,
    pub retrieval_n: usize,
    pub checker: CheckerChoice,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            n_candidates: 20,
            retrieval_n: 5,
            checker: CheckerChoice::External,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoopConfigError {
    #[error("max_iterations must be at least 1")]
    MaxIterations,
    #[error("n_candidates must be at least 1")]
    Candidates,
    #[error("retrieval_n must be at least 1")]
    RetrievalN,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopConfigError> {
        if self.max_iterations == 0 {
            return Err(LoopConfigError::MaxIterations);
        }
        if self.n_candidates == 0 {
            return Err(LoopConfigError::Candidates);
        }
        if self.retrieval_n == 0 {
            return Err(LoopConfigError::RetrievalN);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateStatus {
    Clean,
    Failing,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub code: String,
    /// Refinement rounds applied; 0 is the initial sample.
    pub iteration: u32,
    pub report: CheckReport,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralTrace {
    pub diagnostic: String,
    /// Query text, or `hardcoded:<code>` for table lookups.
    pub query: String,
    pub tuples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub task_id: String,
    pub candidate: usize,
    pub iteration: u32,
    pub prompt_digest: String,
    pub structural: Vec<StructuralTrace>,
    pub semantic: Vec<ScoredEntry>,
    pub diagnostics_before: Vec<Diagnostic>,
    pub diagnostics_after: Vec<Diagnostic>,
    pub code_digest: String,
}
