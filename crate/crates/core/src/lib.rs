//! Repository-context-aware repair of generated Python code.
//!
//! The pipeline indexes a project into a [`ProjectDatabase`] of symbols plus
//! six precomputed structural relations and a dense embedding index, checks
//! generated code with a static analyzer, retrieves project context for each
//! error (structurally by query, semantically by cosine similarity), and
//! re-prompts a [`CompletionBackend`] until the candidate compiles clean.
//! The [`eval`] module scores the results (Pass@k, edit similarity, exact
//! match, identifier F1, error distributions).

pub mod diagnostics;
pub mod eval;
pub mod index;
pub mod llm;
pub mod par;
pub mod python;
pub mod query;
pub mod refine;
pub mod semantic;
pub mod span;

pub use diagnostics::{CheckReport, Diagnostic, ErrorCategory, ErrorSubtype};
pub use index::{ContextEntry, EntryId, EntryKind, ProjectDatabase, SourceUnit, StructuralTables};
pub use llm::{CompletionBackend, GenerationConfig, PromptBundle};
pub use query::{QueryResult, StructuralQuery};
pub use refine::{Candidate, CandidateStatus, GenerationTask, IterationTrace, LoopConfig};
pub use semantic::{EmbeddingIndex, EmbeddingVector, Encoder};
pub use span::LineSpan;
