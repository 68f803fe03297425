use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::Diagnostic;
use crate::index::EntryId;
use crate::query::DEMONSTRATIONS;

pub const TRUNCATION_MARKER: &str = "[... context truncated to fit the prompt budget ...]";

const GENERATION_PREAMBLE: &str =
    "Complete the code for the requirement below. Use the project context where relevant and reply with code only.";
const QUERY_INSTRUCTION: &str = "Translate the compiler error into a structural query over the project database. \
Available kinds: Module, Class, Function, Variable. Predicates: a.contains(b), v.getName() = 'name', \
v.getScope() = w, v.inSource(), v.isInitMethod(), optionally negated with `not`. \
Select variables, optionally as v.getDefinition(). Reply with the query only.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Generation,
    QuerySynthesis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSegment {
    pub label: String,
    pub text: String,
}

impl PromptSegment {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub segments: Vec<PromptSegment>,
    pub rendered: String,
}

fn preamble(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::Generation => GENERATION_PREAMBLE,
        PromptKind::QuerySynthesis => QUERY_INSTRUCTION,
    }
}

fn render(kind: PromptKind, segments: &[PromptSegment]) -> String {
    let mut out = String::from(preamble(kind));
    out.push('\n');
    for s in segments {
        out.push_str("\n### ");
        out.push_str(&s.label);
        out.push('\n');
        out.push_str(&s.text);
        out.push('\n');
    }
    out
}

fn rendered_len(kind: PromptKind, segments: &[PromptSegment]) -> usize {
    preamble(kind).chars().count()
        + 1
        + segments
            .iter()
            .map(|s| 7 + s.label.chars().count() + s.text.chars().count())
            .sum::<usize>()
}

impl PromptBundle {
    pub fn new(kind: PromptKind, segments: Vec<PromptSegment>) -> Self {
        let rendered = render(kind, &segments);
        Self {
            kind,
            segments,
            rendered,
        }
    }

    pub fn char_len(&self) -> usize {
        self.rendered.chars().count()
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.rendered)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextSource {
    Structural,
    Semantic,
}

/// One retrieved context passage. `entry_ids` are the entries it shows;
/// the last one is its identity for de-duplication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnippet {
    pub source: ContextSource,
    pub entry_ids: Vec<EntryId>,
    pub text: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("task requirement is empty")]
    EmptyRequirement,
    #[error("prompt needs {needed} characters without context, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

/// Structural snippets first, then semantic; a snippet whose entry is
/// already shown by an earlier one is dropped.
fn order_contexts(contexts: &[ContextSnippet]) -> Vec<&ContextSnippet> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for source in [ContextSource::Structural, ContextSource::Semantic] {
        for c in contexts.iter().filter(|c| c.source == source) {
            if let Some(key) = c.entry_ids.last() {
                if seen.contains(key) {
                    continue;
                }
            }
            seen.extend(c.entry_ids.iter().copied());
            out.push(c);
        }
    }
    out
}

/// Longest prefix of `text` with at most `max` chars, cut at a line end
/// when one is available.
fn cut(text: &str, max: usize) -> &str {
    let end = text.char_indices().nth(max).map_or(text.len(), |(i, _)| i);
    let head = &text[..end];
    if end == text.len() {
        return head;
    }
    match head.rfind('\n') {
        Some(nl) if nl > 0 => &head[..nl],
        _ => head,
    }
}

/// Layout: requirement (with stub), contexts, previous solution, compiler
/// feedback. Contexts are shortened last-first to respect `budget`.
pub fn render_generation_prompt(
    requirement: &str,
    signature_stub: Option<&str>,
    contexts: &[ContextSnippet],
    prior_solution: Option<&str>,
    feedback: Option<&str>,
    budget: usize,
) -> Result<PromptBundle, PromptError> {
    if requirement.trim().is_empty() {
        return Err(PromptError::EmptyRequirement);
    }
    let mut req = requirement.trim_end().to_string();
    if let Some(stub) = signature_stub.filter(|s| !s.trim().is_empty()) {
        req.push_str("\n\n");
        req.push_str(stub.trim_end());
    }
    let head = vec![PromptSegment::new("Requirement", req)];
    let mut tail = Vec::new();
    if let Some(p) = prior_solution {
        tail.push(PromptSegment::new("Previous solution", p.trim_end()));
    }
    if let Some(f) = feedback {
        tail.push(PromptSegment::new("Compiler feedback", f.trim_end()));
    }
    let fixed: Vec<PromptSegment> = head.iter().chain(&tail).cloned().collect();
    let fixed_len = rendered_len(PromptKind::Generation, &fixed);
    if fixed_len > budget {
        return Err(PromptError::BudgetExceeded {
            needed: fixed_len,
            budget,
        });
    }

    let ordered = order_contexts(contexts);
    let full: Vec<PromptSegment> = ordered
        .iter()
        .map(|c| PromptSegment::new("Context", c.text.trim_end()))
        .collect();
    let overhead = |s: &PromptSegment| 7 + s.label.chars().count() + s.text.chars().count();
    let mut kept: Vec<PromptSegment> = Vec::new();
    let total: usize = fixed_len + full.iter().map(overhead).sum::<usize>();
    if total <= budget {
        kept = full;
    } else {
        let marker = PromptSegment::new("Context", TRUNCATION_MARKER);
        let mut room = budget.saturating_sub(fixed_len + overhead(&marker));
        for seg in full {
            let need = overhead(&seg);
            if need <= room {
                room -= need;
                kept.push(seg);
                continue;
            }
            let text_room = room.saturating_sub(7 + seg.label.chars().count());
            let part = cut(&seg.text, text_room).trim_end();
            if !part.is_empty() {
                kept.push(PromptSegment::new(seg.label.clone(), part));
            }
            break;
        }
        if budget >= fixed_len + overhead(&marker) {
            kept.push(marker);
        }
    }

    let segments: Vec<PromptSegment> = head.into_iter().chain(kept).chain(tail).collect();
    let bundle = PromptBundle::new(PromptKind::Generation, segments);
    debug_assert!(bundle.char_len() <= budget);
    Ok(bundle)
}

/// Fixed instruction, the four demonstration pairs, then the error.
pub fn render_query_prompt(diag: &Diagnostic) -> PromptBundle {
    let mut segments = vec![];
    for (error, query) in DEMONSTRATIONS {
        segments.push(PromptSegment::new("Demonstration", format!("Error: {error}\nQuery: {query}")));
    }
    segments.push(PromptSegment::new("Error", diag.message.clone()));
    PromptBundle::new(PromptKind::QuerySynthesis, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snippet(source: ContextSource, id: u32, text: &str) -> ContextSnippet {
        ContextSnippet {
            source,
            entry_ids: vec![EntryId(id)],
            text: text.into(),
        }
    }

    #[test]
    fn initial_shape() {
        let ctx = [
            snippet(ContextSource::Semantic, 1, "def a(): ..."),
            snippet(ContextSource::Structural, 2, "class B: ..."),
        ];
        let b = render_generation_prompt("Write f.", None, &ctx, None, None, 12_000).unwrap();
        assert_eq!(b.segments.len(), 3);
        assert_eq!(b.segments[1].text, "class B: ...");
        assert!(b.segments.iter().all(|s| s.label != "Compiler feedback"));
        let again = render_generation_prompt("Write f.", None, &ctx, None, None, 12_000).unwrap();
        assert_eq!(b.rendered, again.rendered);
        assert_eq!(b.char_len(), b.rendered.chars().count());
    }

    #[test]
    fn duplicates_collapse() {
        let ctx = [
            snippet(ContextSource::Semantic, 7, "semantic view"),
            snippet(ContextSource::Structural, 7, "structural view"),
        ];
        let b = render_generation_prompt("r", None, &ctx, None, None, 12_000).unwrap();
        let texts: Vec<_> = b.segments.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["r", "structural view"]);
    }

    #[test]
    fn refinement_layout() {
        let b = render_generation_prompt(
            "r",
            Some("def f(x):"),
            &[snippet(ContextSource::Structural, 1, "ctx")],
            Some("def f(x):\n    return y"),
            Some("E0602 Undefined variable 'y' (line 2): return y"),
            12_000,
        )
        .unwrap();
        let labels: Vec<_> = b.segments.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["Requirement", "Context", "Previous solution", "Compiler feedback"]);
        assert!(b.segments[0].text.ends_with("def f(x):"));
    }

    #[test]
    fn oversized_context_is_truncated() {
        let big = "x = 1\n".repeat(5_000);
        let ctx = [
            snippet(ContextSource::Structural, 1, "keep me"),
            snippet(ContextSource::Semantic, 2, &big),
            snippet(ContextSource::Semantic, 3, "dropped"),
        ];
        let b = render_generation_prompt("req", None, &ctx, None, None, 2_000).unwrap();
        assert!(b.char_len() <= 2_000);
        assert!(b.rendered.contains("keep me"));
        assert!(b.rendered.contains(TRUNCATION_MARKER));
        assert!(!b.rendered.contains("dropped"));
    }

    #[test]
    fn budget_too_small() {
        let err = render_generation_prompt(&"r".repeat(100), None, &[], None, None, 50).unwrap_err();
        assert!(matches!(err, PromptError::BudgetExceeded { .. }));
        assert_eq!(
            render_generation_prompt("  ", None, &[], None, None, 50).unwrap_err(),
            PromptError::EmptyRequirement
        );
    }

    #[test]
    fn query_prompt_has_four_demonstrations() {
        let d = Diagnostic::new("E0611", "No name 'AsyncBolt5x0' in module 'neo4j._sync.io._bolt5'", "m.py", 1, 0);
        let b = render_query_prompt(&d);
        assert_eq!(b.segments.iter().filter(|s| s.label == "Demonstration").count(), 4);
        assert_eq!(b.segments.last().unwrap().text, d.message);
        assert_eq!(b.rendered, render_query_prompt(&d).rendered);
    }
}
