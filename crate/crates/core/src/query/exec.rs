use serde::{Deserialize, Serialize};

use super::ast::{Predicate, StructuralQuery};
use crate::index::{ContextEntry, EntryId, EntryKind, ProjectDatabase};

pub const DEFAULT_SNIPPET_LINES: usize = 40;

/// Matching entry tuples, one rendered snippet per tuple.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub tuples: Vec<Vec<EntryId>>,
    pub rendered: Vec<String>,
}

impl QueryResult {
    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }
}

/// `pkg.__init__` also answers to `pkg`.
fn package_alias(e: &ContextEntry) -> Option<&str> {
    if e.kind == EntryKind::Module {
        e.qualified_name.strip_suffix(".__init__")
    } else {
        None
    }
}

/// Simple-name comparison, or qualified when the literal is dotted.
pub fn name_matches(e: &ContextEntry, lit: &str) -> bool {
    let dotted = lit.contains('.');
    let own = if dotted { &e.qualified_name } else { &e.name };
    if own == lit {
        return true;
    }
    match package_alias(e) {
        Some(alias) if dotted => alias == lit,
        Some(alias) => alias.rsplit('.').next() == Some(lit),
        None => false,
    }
}

/// Module→Function containment is transitive; every other pairing is
/// direct parenthood.
pub fn contains(db: &ProjectDatabase, outer: EntryId, inner: EntryId) -> bool {
    let (Some(a), Some(b)) = (db.entry(outer), db.entry(inner)) else {
        return false;
    };
    if a.kind == EntryKind::Module && b.kind == EntryKind::Function {
        db.is_ancestor(outer, inner)
    } else {
        b.parent == Some(outer)
    }
}

fn eval(db: &ProjectDatabase, q: &StructuralQuery, p: &Predicate, binding: &[EntryId]) -> bool {
    let id = |v: &str| binding[q.var_index(v).expect("validated query")];
    match p {
        Predicate::Contains(a, b) => contains(db, id(a), id(b)),
        Predicate::NameEquals(v, lit) => db.entry(id(v)).is_some_and(|e| name_matches(e, lit)),
        Predicate::ScopeEquals(v, w) => db.entry(id(v)).is_some_and(|e| e.parent == Some(id(w))),
        Predicate::InSource(_) => true,
        Predicate::IsInitMethod(v) => db
            .entry(id(v))
            .is_some_and(|e| e.kind == EntryKind::Function && e.name == "__init__"),
        Predicate::Not(inner) => !eval(db, q, inner, binding),
    }
}

/// Nested-loop join over the declared variables. Each predicate is checked
/// as soon as the last variable it mentions is bound.
pub fn execute_query(q: &StructuralQuery, db: &ProjectDatabase) -> QueryResult {
    execute_query_with(q, db, DEFAULT_SNIPPET_LINES)
}

pub fn execute_query_with(q: &StructuralQuery, db: &ProjectDatabase, max_lines: usize) -> QueryResult {
    let domains: Vec<Vec<EntryId>> = q
        .from
        .iter()
        .map(|v| db.entries().iter().filter(|e| e.kind == v.kind).map(|e| e.id).collect())
        .collect();
    let mut checks: Vec<Vec<&Predicate>> = vec![Vec::new(); q.from.len()];
    for p in &q.predicates {
        let depth = p.variables().iter().filter_map(|v| q.var_index(v)).max().unwrap_or(0);
        checks[depth].push(p);
    }
    let select: Vec<usize> = q.select.iter().filter_map(|s| q.var_index(&s.var)).collect();

    let mut tuples = Vec::new();
    if !q.from.is_empty() {
        let mut binding = vec![EntryId(u32::MAX); q.from.len()];
        join(db, q, &domains, &checks, &select, 0, &mut binding, &mut tuples);
    }
    tuples.sort();
    tuples.dedup();
    let rendered = tuples.iter().map(|t| render_tuple(db, q, t, max_lines)).collect();
    QueryResult { tuples, rendered }
}

#[allow(clippy::too_many_arguments)]
fn join(
    db: &ProjectDatabase,
    q: &StructuralQuery,
    domains: &[Vec<EntryId>],
    checks: &[Vec<&Predicate>],
    select: &[usize],
    depth: usize,
    binding: &mut [EntryId],
    out: &mut Vec<Vec<EntryId>>,
) {
    if depth == domains.len() {
        out.push(select.iter().map(|&i| binding[i]).collect());
        return;
    }
    for &id in &domains[depth] {
        binding[depth] = id;
        if checks[depth].iter().all(|p| eval(db, q, p, binding)) {
            join(db, q, domains, checks, select, depth + 1, binding, out);
        }
    }
}

fn excerpt(text: &str, max_lines: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() <= max_lines {
        return lines.join("\n");
    }
    let mut out = lines[..max_lines].join("\n");
    out.push_str("\n...");
    out
}

/// Header plus source for one entry. Modules show only their header and
/// docstring unless their definition was requested.
pub fn render_entry(db: &ProjectDatabase, id: EntryId, definition: bool, max_lines: usize) -> String {
    let Some(e) = db.entry(id) else {
        return String::new();
    };
    let mut out = format!("# {} {} ({}:{})", e.kind.as_str().to_lowercase(), e.qualified_name, e.file, e.span);
    if let Some(sig) = &e.signature {
        out.push_str(&format!("\n# signature: {}({})", e.name, sig.render()));
    }
    let show_source = definition || e.kind != EntryKind::Module;
    if let (true, Some(text)) = (show_source, db.definition_text(id)) {
        out.push('\n');
        out.push_str(&excerpt(&text, max_lines));
    } else if let Some(doc) = &e.docstring {
        out.push_str("\n# ");
        out.push_str(doc.lines().next().unwrap_or(""));
    }
    out
}

fn render_tuple(db: &ProjectDatabase, q: &StructuralQuery, tuple: &[EntryId], max_lines: usize) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut shown: Vec<EntryId> = Vec::new();
    for (item, &id) in q.select.iter().zip(tuple) {
        if !shown.contains(&id) {
            shown.push(id);
            parts.push(render_entry(db, id, item.definition, max_lines));
        }
    }
    parts.join("\n")
}
