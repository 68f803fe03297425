use std::collections::{BTreeMap, BTreeSet, HashSet};

use rustpython_parser::ast::{self, Ranged};

use super::entry::{ContextEntry, EntryId, EntryKind, Signature};
use super::source::SourceUnit;
use crate::python::{self, ParsedModule, Stmt, SyntaxError};
use crate::span::LineSpan;

const VALUE_PREVIEW_CHARS: usize = 200;

/// Dotted module name for a repository-relative path: separators become
/// dots and the extension is dropped (`sub/b.py` → `sub.b`).
pub fn module_name(path: &str) -> String {
    let file_start = path.rfind('/').map_or(0, |i| i + 1);
    let stem_end = match path[file_start..].rfind('.') {
        Some(i) if i > 0 => file_start + i,
        _ => path.len(),
    };
    path[..stem_end].replace(['/', '\\'], ".")
}

enum Visit<'a> {
    Root,
    Node(&'a Stmt),
    PrefixMark,
}

struct Frame {
    local: u32,
    kind: EntryKind,
    qualified: String,
    /// Name of the bound-instance parameter, for methods.
    self_name: Option<String>,
    /// Names already defined on a class (body members plus instance attributes).
    members: HashSet<String>,
}

/// Entries for one file with file-local ids (module root is id 0).
///
/// Walks the syntax tree with an explicit node stack. Every module, class,
/// function or variable node becomes an entry whose qualified name is the
/// current prefix stack plus its own name; a prefix mark pushed under its
/// children pops the prefix once the subtree is exhausted. Children are
/// pushed in reverse so ids follow source order.
pub fn extract_entries(unit: &SourceUnit) -> Result<Vec<ContextEntry>, SyntaxError> {
    let parsed = ParsedModule::parse(&unit.text, &unit.path)?;
    let mut x = Extractor {
        parsed: &parsed,
        file: &unit.path,
        entries: Vec::new(),
        prefix: Vec::new(),
        imports: BTreeSet::new(),
    };
    let mut stack = vec![Visit::Root];
    while let Some(node) = stack.pop() {
        match node {
            Visit::PrefixMark => {
                x.prefix.pop();
            }
            Visit::Root => {
                x.visit_root();
                stack.push(Visit::PrefixMark);
                push_children(&mut stack, &parsed.suite);
            }
            Visit::Node(stmt) => x.visit_stmt(stmt, &mut stack),
        }
    }
    if !x.imports.is_empty() {
        let imports = x.imports.iter().cloned().collect::<Vec<_>>().join(",");
        x.entries[0].properties.insert("imports".into(), imports);
    }
    Ok(x.entries)
}

fn push_children<'a>(stack: &mut Vec<Visit<'a>>, body: &'a [Stmt]) {
    stack.extend(body.iter().rev().map(Visit::Node));
}

struct Extractor<'p, 'src> {
    parsed: &'p ParsedModule<'src>,
    file: &'p str,
    entries: Vec<ContextEntry>,
    prefix: Vec<Frame>,
    imports: BTreeSet<String>,
}

impl<'p, 'src> Extractor<'p, 'src> {
    fn top(&self) -> &Frame {
        self.prefix.last().expect("module frame present")
    }

    fn add(
        &mut self,
        kind: EntryKind,
        name: &str,
        span: LineSpan,
        docstring: Option<String>,
        signature: Option<Signature>,
        properties: BTreeMap<String, String>,
        parent: Option<&Frame>,
    ) -> u32 {
        let local = self.entries.len() as u32;
        let qualified_name = match parent {
            Some(p) => format!("{}.{}", p.qualified, name),
            None => name.to_string(),
        };
        self.entries.push(ContextEntry {
            id: EntryId(local),
            kind,
            name: match kind {
                EntryKind::Module => name.rsplit('.').next().unwrap_or(name).to_string(),
                _ => name.to_string(),
            },
            qualified_name,
            file: self.file.to_string(),
            docstring,
            signature,
            span,
            parent: parent.map(|p| EntryId(p.local)),
            properties,
        });
        local
    }

    fn visit_root(&mut self) {
        let module = module_name(self.file);
        let span = LineSpan::new(1, self.parsed.lines.line_count().max(1));
        let doc = python::docstring(&self.parsed.suite);
        let local = self.add(EntryKind::Module, &module, span, doc, None, BTreeMap::new(), None);
        self.prefix.push(Frame {
            local,
            kind: EntryKind::Module,
            qualified: module,
            self_name: None,
            members: HashSet::new(),
        });
    }

    fn visit_stmt<'a>(&mut self, stmt: &'a Stmt, stack: &mut Vec<Visit<'a>>) {
        match stmt {
            Stmt::FunctionDef(f) => {
                let props = self.function_properties(&f.decorator_list, f.returns.as_deref(), false);
                self.visit_function(stmt, &f.name, &f.args, &f.body, &f.decorator_list, props, stack);
            }
            Stmt::AsyncFunctionDef(f) => {
                let props = self.function_properties(&f.decorator_list, f.returns.as_deref(), true);
                self.visit_function(stmt, &f.name, &f.args, &f.body, &f.decorator_list, props, stack);
            }
            Stmt::ClassDef(c) => self.visit_class(stmt, c, stack),
            Stmt::Assign(a) => {
                for target in &a.targets {
                    self.visit_assignment(stmt, target, Some(&a.value), None);
                }
            }
            Stmt::AnnAssign(a) => {
                self.visit_assignment(stmt, &a.target, a.value.as_deref(), Some(&a.annotation));
            }
            Stmt::Import(i) if self.top().kind == EntryKind::Module => {
                for alias in &i.names {
                    let bound = alias
                        .asname
                        .as_deref()
                        .unwrap_or_else(|| alias.name.split('.').next().unwrap_or(&alias.name));
                    self.imports.insert(bound.to_string());
                }
            }
            Stmt::ImportFrom(i) if self.top().kind == EntryKind::Module => {
                for alias in &i.names {
                    let bound = alias.asname.as_deref().unwrap_or(&alias.name);
                    self.imports.insert(bound.to_string());
                }
            }
            // compound statements are transparent: their bodies share the scope
            Stmt::If(s) => {
                push_children(stack, &s.orelse);
                push_children(stack, &s.body);
            }
            Stmt::For(s) => {
                push_children(stack, &s.orelse);
                push_children(stack, &s.body);
            }
            Stmt::AsyncFor(s) => {
                push_children(stack, &s.orelse);
                push_children(stack, &s.body);
            }
            Stmt::While(s) => {
                push_children(stack, &s.orelse);
                push_children(stack, &s.body);
            }
            Stmt::With(s) => push_children(stack, &s.body),
            Stmt::AsyncWith(s) => push_children(stack, &s.body),
            Stmt::Try(s) => {
                push_children(stack, &s.finalbody);
                push_children(stack, &s.orelse);
                for h in s.handlers.iter().rev() {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    push_children(stack, &h.body);
                }
                push_children(stack, &s.body);
            }
            Stmt::TryStar(s) => {
                push_children(stack, &s.finalbody);
                push_children(stack, &s.orelse);
                for h in s.handlers.iter().rev() {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    push_children(stack, &h.body);
                }
                push_children(stack, &s.body);
            }
            Stmt::Match(m) => {
                for case in m.cases.iter().rev() {
                    push_children(stack, &case.body);
                }
            }
            _ => {}
        }
    }

    fn definition_span(&self, stmt: &Stmt, decorators: &[ast::Expr]) -> LineSpan {
        let start = decorators
            .iter()
            .map(|d| self.parsed.start_line(d))
            .chain(std::iter::once(self.parsed.start_line(stmt)))
            .min()
            .unwrap_or(1);
        LineSpan::new(start, self.parsed.end_line(stmt))
    }

    fn function_properties(
        &self,
        decorators: &[ast::Expr],
        returns: Option<&ast::Expr>,
        is_async: bool,
    ) -> BTreeMap<String, String> {
        let mut props = BTreeMap::new();
        if !decorators.is_empty() {
            props.insert("decorators".into(), self.join_sources(decorators));
        }
        if let Some(r) = returns {
            props.insert("returns".into(), self.parsed.slice(r.range()).to_string());
        }
        if is_async {
            props.insert("async".into(), "true".into());
        }
        props
    }

    fn join_sources(&self, exprs: &[ast::Expr]) -> String {
        exprs
            .iter()
            .map(|e| self.parsed.slice(e.range()))
            .collect::<Vec<_>>()
            .join(", ")
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_function<'a>(
        &mut self,
        stmt: &'a Stmt,
        name: &str,
        args: &ast::Arguments,
        body: &'a [Stmt],
        decorators: &[ast::Expr],
        props: BTreeMap<String, String>,
        stack: &mut Vec<Visit<'a>>,
    ) {
        let signature = signature_of(args);
        let span = self.definition_span(stmt, decorators);
        let doc = python::docstring(body);
        let is_static = decorators
            .iter()
            .any(|d| python::dotted_name(d).as_deref() == Some("staticmethod"));
        let in_class = self.top().kind == EntryKind::Class;
        let self_name = (in_class && !is_static)
            .then(|| signature.params.first().cloned())
            .flatten();
        let parent = self.prefix.pop().expect("parent frame");
        let local = self.add(EntryKind::Function, name, span, doc, Some(signature), props, Some(&parent));
        let qualified = self.entries[local as usize].qualified_name.clone();
        self.prefix.push(parent);
        self.prefix.push(Frame {
            local,
            kind: EntryKind::Function,
            qualified,
            self_name,
            members: HashSet::new(),
        });
        stack.push(Visit::PrefixMark);
        push_children(stack, body);
    }

    fn visit_class<'a>(&mut self, stmt: &'a Stmt, class: &'a ast::StmtClassDef, stack: &mut Vec<Visit<'a>>) {
        let span = self.definition_span(stmt, &class.decorator_list);
        let doc = python::docstring(&class.body);
        let mut props = BTreeMap::new();
        if !class.bases.is_empty() {
            props.insert("bases".into(), self.join_sources(&class.bases));
        }
        if !class.decorator_list.is_empty() {
            props.insert("decorators".into(), self.join_sources(&class.decorator_list));
        }
        if !class.keywords.is_empty() {
            let kws: Vec<&str> = class.keywords.iter().map(|k| self.parsed.slice(k.range())).collect();
            props.insert("keywords".into(), kws.join(", "));
        }
        let mut members = HashSet::new();
        collect_body_names(&class.body, &mut members);
        let parent = self.prefix.pop().expect("parent frame");
        let local = self.add(EntryKind::Class, &class.name, span, doc, None, props, Some(&parent));
        let qualified = self.entries[local as usize].qualified_name.clone();
        self.prefix.push(parent);
        self.prefix.push(Frame {
            local,
            kind: EntryKind::Class,
            qualified,
            self_name: None,
            members,
        });
        stack.push(Visit::PrefixMark);
        push_children(stack, &class.body);
    }

    fn visit_assignment(
        &mut self,
        stmt: &Stmt,
        target: &ast::Expr,
        value: Option<&ast::Expr>,
        annotation: Option<&ast::Expr>,
    ) {
        let mut props = BTreeMap::new();
        if let Some(v) = value {
            props.insert("value".into(), preview(self.parsed.slice(v.range())));
        }
        if let Some(a) = annotation {
            props.insert("annotation".into(), self.parsed.slice(a.range()).to_string());
        }
        let span = LineSpan::new(self.parsed.start_line(stmt), self.parsed.end_line(stmt));
        match self.top().kind {
            EntryKind::Module | EntryKind::Class => {
                let mut names = Vec::new();
                python::target_names(target, &mut names);
                let parent = self.prefix.pop().expect("parent frame");
                for (name, _) in names {
                    self.add(EntryKind::Variable, &name, span, None, None, props.clone(), Some(&parent));
                }
                self.prefix.push(parent);
            }
            EntryKind::Function => self.visit_instance_attribute(target, span, props),
            EntryKind::Variable => {}
        }
    }

    /// `self.x = ...` inside a method defines class member `x`.
    fn visit_instance_attribute(&mut self, target: &ast::Expr, span: LineSpan, mut props: BTreeMap<String, String>) {
        let ast::Expr::Attribute(attr) = target else { return };
        let ast::Expr::Name(base) = attr.value.as_ref() else { return };
        let n = self.prefix.len();
        if n < 2 || self.prefix[n - 2].kind != EntryKind::Class {
            return;
        }
        if self.prefix[n - 1].self_name.as_deref() != Some(base.id.as_str()) {
            return;
        }
        let name = attr.attr.to_string();
        if !self.prefix[n - 2].members.insert(name.clone()) {
            return;
        }
        props.insert("instance".into(), "true".into());
        let method = self.prefix.pop().expect("method frame");
        let class = self.prefix.pop().expect("class frame");
        self.add(EntryKind::Variable, &name, span, None, None, props, Some(&class));
        self.prefix.push(class);
        self.prefix.push(method);
    }
}

fn preview(src: &str) -> String {
    if src.chars().count() <= VALUE_PREVIEW_CHARS {
        src.to_string()
    } else {
        let cut: String = src.chars().take(VALUE_PREVIEW_CHARS).collect();
        format!("{cut}...")
    }
}

fn signature_of(args: &ast::Arguments) -> Signature {
    let positional: Vec<&ast::ArgWithDefault> = args.posonlyargs.iter().chain(&args.args).collect();
    Signature {
        params: positional.iter().map(|a| a.def.arg.to_string()).collect(),
        defaults: positional.iter().filter(|a| a.default.is_some()).count(),
        vararg: args.vararg.is_some(),
        kwarg: args.kwarg.is_some(),
        kwonly: args.kwonlyargs.iter().map(|a| a.def.arg.to_string()).collect(),
    }
}

/// Names a class body defines directly (methods, nested classes, assignments).
fn collect_body_names(body: &[Stmt], out: &mut HashSet<String>) {
    for stmt in body {
        match stmt {
            Stmt::FunctionDef(f) => {
                out.insert(f.name.to_string());
            }
            Stmt::AsyncFunctionDef(f) => {
                out.insert(f.name.to_string());
            }
            Stmt::ClassDef(c) => {
                out.insert(c.name.to_string());
            }
            Stmt::Assign(a) => {
                let mut names = Vec::new();
                a.targets.iter().for_each(|t| python::target_names(t, &mut names));
                out.extend(names.into_iter().map(|(n, _)| n));
            }
            Stmt::AnnAssign(a) => {
                let mut names = Vec::new();
                python::target_names(&a.target, &mut names);
                out.extend(names.into_iter().map(|(n, _)| n));
            }
            Stmt::If(s) => {
                collect_body_names(&s.body, out);
                collect_body_names(&s.orelse, out);
            }
            Stmt::Try(s) => {
                collect_body_names(&s.body, out);
                collect_body_names(&s.orelse, out);
                collect_body_names(&s.finalbody, out);
            }
            _ => {}
        }
    }
}
