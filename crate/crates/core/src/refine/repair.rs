use thiserror::Error;

use super::feedback::{assemble_feedback, insert_code};
use super::task::{
    Candidate, CandidateStatus, GenerationTask, IterationTrace, LoopConfig, LoopConfigError, StructuralTrace,
};
use crate::diagnostics::{filter_to_solution, CheckError, CheckReport, Checker, Diagnostic, ErrorCategory};
use crate::index::ProjectDatabase;
use crate::llm::{
    extract_code, render_generation_prompt, sha256_hex, BackendError, CompletionBackend, CompletionRequest,
    ContextSnippet, ContextSource, GenerationConfig, PromptBundle, PromptError, PromptKind,
};
use crate::par;
use crate::query::{execute_query, hardcoded_query_for, render_entry, SynthesisError, DEFAULT_SNIPPET_LINES};
use crate::semantic::{top_n, Encoder, QueryMode, RetrievalQuery, ScoredEntry};
use crate::span::LineSpan;

/// Code of the diagnostic recorded when a completion holds no code.
pub const EMPTY_COMPLETION_CODE: &str = "EMPTY";

/// Everything a repair run reads but never mutates.
#[derive(Clone, Copy)]
pub struct RepairContext<'a> {
    pub db: &'a ProjectDatabase,
    pub backend: &'a dyn CompletionBackend,
    pub encoder: &'a dyn Encoder,
    pub checker: &'a dyn Checker,
    pub generation: &'a GenerationConfig,
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub candidates: Vec<Candidate>,
    /// Ordered by candidate, then iteration.
    pub traces: Vec<IterationTrace>,
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Config(#[from] LoopConfigError),
    #[error("task '{task}': {message}")]
    Task { task: String, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Checker(#[from] CheckError),
}

/// An aborted run, with whatever was produced before the failure.
#[derive(Debug, Error)]
#[error("repair of task '{task_id}' aborted: {error}")]
pub struct RepairFailure {
    pub task_id: String,
    pub error: RepairError,
    pub partial: RepairOutcome,
}

struct Slot {
    code: String,
    file_text: String,
    report: CheckReport,
    iteration: u32,
    frozen: bool,
}

fn task_source(task: &GenerationTask, db: &ProjectDatabase) -> Result<String, RepairError> {
    if let Some(text) = db.source(&task.target_file) {
        return Ok(text.to_string());
    }
    let path = std::path::Path::new(db.project_root()).join(&task.target_file);
    std::fs::read_to_string(&path).map_err(|e| RepairError::Task {
        task: task.id.clone(),
        message: format!("cannot read {}: {e}", task.target_file),
    })
}

fn validate_task(task: &GenerationTask, original: &str) -> Result<(), RepairError> {
    let lines = original.lines().count() as u32;
    let span = task.insertion_span;
    if !span.is_valid() || span.end > lines.max(1) {
        return Err(RepairError::Task {
            task: task.id.clone(),
            message: format!("insertion span {span} outside {} ({lines} lines)", task.target_file),
        });
    }
    if task.requirement.trim().is_empty() {
        return Err(PromptError::EmptyRequirement.into());
    }
    Ok(())
}

fn semantic_snippets(db: &ProjectDatabase, hits: &[ScoredEntry]) -> Vec<ContextSnippet> {
    hits.iter()
        .map(|h| ContextSnippet {
            source: ContextSource::Semantic,
            entry_ids: vec![h.entry_id],
            text: render_entry(db, h.entry_id, false, DEFAULT_SNIPPET_LINES),
        })
        .collect()
}

fn semantic_search(
    ctx: &RepairContext<'_>,
    text: &str,
    mode: QueryMode,
    n: usize,
) -> Vec<ScoredEntry> {
    match top_n(&RetrievalQuery::new(text, mode), ctx.db.index(), ctx.encoder, n) {
        Ok(hits) => hits,
        Err(e) => {
            tracing::warn!("semantic retrieval failed: {e}");
            Vec::new()
        }
    }
}

/// Structural lookup for each distinct feedback diagnostic: table lookups
/// for the frequent codes, a synthesized query otherwise.
fn structural_retrieval(
    ctx: &RepairContext<'_>,
    task_id: &str,
    diags: &[&Diagnostic],
) -> Result<(Vec<ContextSnippet>, Vec<StructuralTrace>), BackendError> {
    let mut snippets = Vec::new();
    let mut traces = Vec::new();
    let mut seen: Vec<(&str, &str)> = Vec::new();
    for d in diags {
        if d.code == EMPTY_COMPLETION_CODE || d.category == ErrorCategory::Func {
            continue;
        }
        if seen.contains(&(d.code.as_str(), d.message.as_str())) {
            continue;
        }
        seen.push((&d.code, &d.message));
        let label = format!("{} {}", d.code, d.message);
        let (query, result, rejected) = match hardcoded_query_for(d, ctx.db) {
            Some(r) => (format!("hardcoded:{}", d.code), Some(r), None),
            None => match crate::query::synthesize_query(d, ctx.backend, task_id, ctx.generation) {
                Ok(q) => {
                    let r = execute_query(&q, ctx.db);
                    (q.to_string(), Some(r), None)
                }
                Err(SynthesisError::Backend(e)) => return Err(e),
                Err(SynthesisError::QueryRejected { error, completion }) => {
                    tracing::info!(%error, "synthesized query rejected");
                    (completion.trim().to_string(), None, Some(error.to_string()))
                }
            },
        };
        let tuples = result.as_ref().map_or(0, |r| r.len());
        if let Some(r) = result {
            for (t, text) in r.tuples.into_iter().zip(r.rendered) {
                snippets.push(ContextSnippet {
                    source: ContextSource::Structural,
                    entry_ids: t,
                    text,
                });
            }
        }
        traces.push(StructuralTrace {
            diagnostic: label,
            query,
            tuples,
            rejected,
        });
    }
    Ok((snippets, traces))
}

fn empty_completion(task: &GenerationTask, line: u32) -> Diagnostic {
    Diagnostic::new(
        EMPTY_COMPLETION_CODE,
        "Completion contained no code",
        task.target_file.as_str(),
        line,
        0,
    )
}

/// Inserts and checks one sampled response.
fn evaluate(
    ctx: &RepairContext<'_>,
    task: &GenerationTask,
    original: &str,
    response: &str,
) -> Result<(String, String, CheckReport), CheckError> {
    let code = match extract_code(response) {
        Ok(c) => c,
        Err(_) => {
            let d = empty_completion(task, task.insertion_span.start);
            let span = LineSpan::new(task.insertion_span.start, task.insertion_span.start);
            return Ok((String::new(), original.to_string(), filter_to_solution(vec![d], span)));
        }
    };
    let (file_text, span) = insert_code(original, task.insertion_span, &code);
    let diags = ctx.checker.check(&task.target_file, &file_text, ctx.db)?;
    Ok((code, file_text, filter_to_solution(diags, span)))
}

fn request<'a>(task: &'a GenerationTask, prompt: &'a PromptBundle, config: &'a GenerationConfig) -> CompletionRequest<'a> {
    CompletionRequest {
        task_id: &task.id,
        kind: PromptKind::Generation,
        prompt,
        config,
    }
}

fn finish(slots: Vec<Slot>, traces: Vec<IterationTrace>, cap: u32) -> RepairOutcome {
    let mut traces = traces;
    traces.sort_by_key(|t| (t.candidate, t.iteration));
    let candidates = slots
        .into_iter()
        .enumerate()
        .map(|(index, s)| Candidate {
            index,
            status: if s.report.clean {
                CandidateStatus::Clean
            } else if s.iteration >= cap {
                CandidateStatus::Exhausted
            } else {
                CandidateStatus::Failing
            },
            code: s.code,
            iteration: s.iteration,
            report: s.report,
        })
        .collect();
    RepairOutcome { candidates, traces }
}

/// Generate, check, retrieve, regenerate. Iteration 0 samples
/// `n_candidates` solutions from one prompt; every later iteration
/// regenerates each still-failing candidate from its own feedback until it
/// is clean or has used `max_iterations` rounds.
pub fn repair(task: &GenerationTask, ctx: &RepairContext<'_>, config: &LoopConfig) -> Result<RepairOutcome, RepairFailure> {
    let mut slots: Vec<Slot> = Vec::new();
    let mut traces: Vec<IterationTrace> = Vec::new();
    let fail = |error: RepairError, slots: Vec<Slot>, traces: Vec<IterationTrace>| RepairFailure {
        task_id: task.id.clone(),
        error,
        partial: finish(slots, traces, config.max_iterations),
    };

    if let Err(e) = config.validate() {
        return Err(fail(e.into(), slots, traces));
    }
    let original = match task_source(task, ctx.db).and_then(|o| validate_task(task, &o).map(|_| o)) {
        Ok(o) => o,
        Err(e) => return Err(fail(e, slots, traces)),
    };

    // iteration 0
    let query_text = match &task.signature_stub {
        Some(stub) => format!("{}\n{}", task.requirement, stub),
        None => task.requirement.clone(),
    };
    let hits = semantic_search(ctx, &query_text, QueryMode::Initial, config.retrieval_n);
    let prompt = match render_generation_prompt(
        &task.requirement,
        task.signature_stub.as_deref(),
        &semantic_snippets(ctx.db, &hits),
        None,
        None,
        ctx.generation.prompt_char_budget,
    ) {
        Ok(p) => p,
        Err(e) => return Err(fail(e.into(), slots, traces)),
    };
    let sample_config = ctx.generation.with_samples(config.n_candidates);
    let responses = match ctx.backend.complete(&request(task, &prompt, &sample_config)) {
        Ok(r) => r,
        Err(e) => return Err(fail(e.into(), slots, traces)),
    };
    let mut responses: Vec<String> = responses.into_iter().take(config.n_candidates).collect();
    if responses.len() < config.n_candidates {
        let missing = config.n_candidates - responses.len();
        tracing::warn!(task = %task.id, missing, "backend returned fewer samples than requested");
        responses.resize(config.n_candidates, String::new());
    }
    let checked = par::map(&responses, |r| evaluate(ctx, task, &original, r));
    let digest = prompt.digest();
    for (i, res) in checked.into_iter().enumerate() {
        let (code, file_text, report) = match res {
            Ok(v) => v,
            Err(e) => return Err(fail(e.into(), slots, traces)),
        };
        traces.push(IterationTrace {
            task_id: task.id.clone(),
            candidate: i,
            iteration: 0,
            prompt_digest: digest.clone(),
            structural: Vec::new(),
            semantic: hits.clone(),
            diagnostics_before: Vec::new(),
            diagnostics_after: report.solution_diagnostics.clone(),
            code_digest: sha256_hex(&code),
        });
        slots.push(Slot {
            frozen: report.clean,
            code,
            file_text,
            report,
            iteration: 0,
        });
    }

    let single = ctx.generation.with_samples(1);
    for iteration in 1..=config.max_iterations {
        let pending: Vec<usize> = (0..slots.len()).filter(|&i| !slots[i].frozen).collect();
        if pending.is_empty() {
            break;
        }
        // backend calls stay sequential so transcripts replay in order
        let mut regenerated: Vec<(usize, String, PromptBundle, Vec<StructuralTrace>, Vec<ScoredEntry>)> = Vec::new();
        for &i in &pending {
            let slot = &slots[i];
            let feedback = assemble_feedback(&slot.report, &slot.file_text).unwrap_or_default();
            let ordered = slot.report.ordered_solution_diagnostics();
            let feedback_diags: Vec<&Diagnostic> =
                ordered.into_iter().take(super::feedback::MAX_FEEDBACK_DIAGNOSTICS).collect();
            let (mut snippets, structural) = match structural_retrieval(ctx, &task.id, &feedback_diags) {
                Ok(v) => v,
                Err(e) => return Err(fail(e.into(), slots, traces)),
            };
            let semantic = semantic_search(ctx, &feedback, QueryMode::Subsequent, config.retrieval_n);
            snippets.extend(semantic_snippets(ctx.db, &semantic));
            let prompt = match render_generation_prompt(
                &task.requirement,
                task.signature_stub.as_deref(),
                &snippets,
                Some(&slot.code),
                Some(&feedback),
                ctx.generation.prompt_char_budget,
            ) {
                Ok(p) => p,
                Err(e) => return Err(fail(e.into(), slots, traces)),
            };
            let response = match ctx.backend.complete(&request(task, &prompt, &single)) {
                Ok(r) => r.into_iter().next().unwrap_or_default(),
                Err(e) => return Err(fail(e.into(), slots, traces)),
            };
            regenerated.push((i, response, prompt, structural, semantic));
        }
        let checked = par::map(&regenerated, |(_, response, _, _, _)| evaluate(ctx, task, &original, response));
        for ((i, _, prompt, structural, semantic), res) in regenerated.into_iter().zip(checked) {
            let (code, file_text, report) = match res {
                Ok(v) => v,
                Err(e) => return Err(fail(e.into(), slots, traces)),
            };
            traces.push(IterationTrace {
                task_id: task.id.clone(),
                candidate: i,
                iteration,
                prompt_digest: prompt.digest(),
                structural,
                semantic,
                diagnostics_before: slots[i].report.solution_diagnostics.clone(),
                diagnostics_after: report.solution_diagnostics.clone(),
                code_digest: sha256_hex(&code),
            });
            let slot = &mut slots[i];
            slot.frozen = report.clean;
            slot.code = code;
            slot.file_text = file_text;
            slot.report = report;
            slot.iteration = iteration;
        }
    }
    Ok(finish(slots, traces, config.max_iterations))
}
