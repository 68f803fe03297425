//! Offline checker over the project index.
//!
//! Finds undefined names (E0602), missing members on indexed classes and
//! modules (E1101), call-arity mismatches against indexed signatures
//! (E1120/E1121/E1123), imports of names a project module does not define
//! (E0611), same-scope redefinitions (E0102) and syntax errors (E0001).
//! Anything it cannot resolve is left alone.

use std::collections::{HashMap, HashSet};

use rustpython_parser::ast::{self, ExprContext, Ranged};

use super::{CheckError, Checker, Diagnostic};
use crate::index::{extract_entries, module_name, ContextEntry, EntryKind, ProjectDatabase, SourceUnit};
use crate::python::{self, Expr, ParsedModule, Stmt};
use crate::span::LineSpan;

const BUILTINS: &[&str] = &[
    "ArithmeticError", "AssertionError", "AttributeError", "BaseException", "BaseExceptionGroup",
    "BlockingIOError", "BrokenPipeError", "BufferError", "BytesWarning", "ChildProcessError",
    "ConnectionAbortedError", "ConnectionError", "ConnectionRefusedError", "ConnectionResetError",
    "DeprecationWarning", "EOFError", "Ellipsis", "EncodingWarning", "EnvironmentError", "Exception",
    "ExceptionGroup", "False", "FileExistsError", "FileNotFoundError", "FloatingPointError",
    "FutureWarning", "GeneratorExit", "IOError", "ImportError", "ImportWarning", "IndentationError",
    "IndexError", "InterruptedError", "IsADirectoryError", "KeyError", "KeyboardInterrupt",
    "LookupError", "MemoryError", "ModuleNotFoundError", "NameError", "None", "NotADirectoryError",
    "NotImplemented", "NotImplementedError", "OSError", "OverflowError", "PendingDeprecationWarning",
    "PermissionError", "ProcessLookupError", "RecursionError", "ReferenceError", "ResourceWarning",
    "RuntimeError", "RuntimeWarning", "StopAsyncIteration", "StopIteration", "SyntaxError",
    "SyntaxWarning", "SystemError", "SystemExit", "TabError", "TimeoutError", "True", "TypeError",
    "UnboundLocalError", "UnicodeDecodeError", "UnicodeEncodeError", "UnicodeError",
    "UnicodeTranslateError", "UnicodeWarning", "UserWarning", "ValueError", "Warning",
    "ZeroDivisionError", "__build_class__", "__debug__", "__doc__", "__import__", "__loader__",
    "__name__", "__package__", "__spec__", "__file__", "__builtins__", "__path__", "__annotations__",
    "__all__", "__dict__", "__class__", "__module__", "__qualname__", "abs", "aiter", "all", "anext",
    "any", "ascii", "bin", "bool", "breakpoint", "bytearray", "bytes", "callable", "chr",
    "classmethod", "compile", "complex", "copyright", "credits", "delattr", "dict", "dir", "divmod",
    "enumerate", "eval", "exec", "exit", "filter", "float", "format", "frozenset", "getattr",
    "globals", "hasattr", "hash", "help", "hex", "id", "input", "int", "isinstance", "issubclass",
    "iter", "len", "license", "list", "locals", "map", "max", "memoryview", "min", "next", "object",
    "oct", "open", "ord", "pow", "print", "property", "quit", "range", "repr", "reversed", "round",
    "set", "setattr", "slice", "sorted", "staticmethod", "str", "sum", "super", "tuple", "type",
    "vars", "zip",
];

/// The index-backed checker.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinChecker;

impl Checker for BuiltinChecker {
    fn name(&self) -> &str {
        "builtin"
    }

    fn check(&self, file: &str, text: &str, db: &ProjectDatabase) -> Result<Vec<Diagnostic>, CheckError> {
        Ok(builtin_check(file, text, LineSpan::new(1, u32::MAX), db))
    }
}

/// Checks `text` as the contents of `file` against the index and returns
/// the findings on lines inside `span`.
pub fn builtin_check(file: &str, text: &str, span: LineSpan, db: &ProjectDatabase) -> Vec<Diagnostic> {
    let parsed = match ParsedModule::parse(text, file) {
        Ok(p) => p,
        Err(err) => {
            let base = file.rsplit('/').next().unwrap_or(file);
            let stem = base.strip_suffix(".py").unwrap_or(base);
            let d = Diagnostic::new(
                "E0001",
                format!("Parsing failed: '{} ({stem}, line {})'", err.message, err.line),
                file,
                err.line,
                err.column,
            );
            return if span.contains_line(d.line) { vec![d] } else { Vec::new() };
        }
    };
    let universe = Universe::new(db, file, text);
    let mut stored_attrs = HashSet::new();
    python::for_each_expr(&parsed.suite, &mut |e| {
        if let Expr::Attribute(a) = e {
            if matches!(a.ctx, ExprContext::Store | ExprContext::Del) {
                stored_attrs.insert(a.attr.to_string());
            }
        }
    });
    let module_qn = module_name(file);
    let mut w = Walker {
        u: &universe,
        parsed: &parsed,
        file,
        module_entry: universe.modules.get(&module_qn).copied(),
        module_qn,
        stored_attrs,
        scopes: Vec::new(),
        diags: Vec::new(),
    };
    w.module();
    let mut diags = w.diags;
    diags.retain(|d| span.contains_line(d.line));
    diags.sort_by(|a, b| (a.line, a.column, &a.code).cmp(&(b.line, b.column, &b.code)));
    diags.dedup();
    diags
}

/// Entry graph with the checked file's entries re-extracted from the
/// candidate text.
struct Universe {
    entries: Vec<ContextEntry>,
    children: Vec<Vec<usize>>,
    names: HashSet<String>,
    modules: HashMap<String, usize>,
    by_qn: HashMap<(String, EntryKind), Vec<usize>>,
}

impl Universe {
    fn new(db: &ProjectDatabase, file: &str, text: &str) -> Self {
        let mut entries: Vec<ContextEntry> = Vec::with_capacity(db.len());
        let mut remap: HashMap<u32, u32> = HashMap::new();
        for e in db.entries().iter().filter(|e| e.file != file) {
            let mut e = e.clone();
            let new = entries.len() as u32;
            remap.insert(e.id.0, new);
            e.id.0 = new;
            e.parent = e.parent.and_then(|p| remap.get(&p.0).map(|&n| crate::index::EntryId(n)));
            entries.push(e);
        }
        if let Ok(local) = extract_entries(&SourceUnit::python(file, text)) {
            let offset = entries.len() as u32;
            entries.extend(local.into_iter().map(|mut e| {
                e.id.0 += offset;
                e.parent = e.parent.map(|p| crate::index::EntryId(p.0 + offset));
                e
            }));
        }
        let mut children = vec![Vec::new(); entries.len()];
        let mut names = HashSet::new();
        let mut modules = HashMap::new();
        let mut by_qn: HashMap<(String, EntryKind), Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(p) = e.parent {
                children[p.index()].push(i);
            }
            names.insert(e.name.clone());
            by_qn.entry((e.qualified_name.clone(), e.kind)).or_default().push(i);
            if e.kind == EntryKind::Module {
                modules.insert(e.qualified_name.clone(), i);
                if let Some(pkg) = e.qualified_name.strip_suffix(".__init__") {
                    modules.entry(pkg.to_string()).or_insert(i);
                }
            }
        }
        Self {
            entries,
            children,
            names,
            modules,
            by_qn,
        }
    }

    fn unique(&self, qn: &str, kind: EntryKind) -> Option<usize> {
        match self.by_qn.get(&(qn.to_string(), kind)).map(Vec::as_slice) {
            Some([one]) => Some(*one),
            _ => None,
        }
    }

    fn module_qn(&self, m: usize) -> &str {
        let qn = &self.entries[m].qualified_name;
        qn.strip_suffix(".__init__").unwrap_or(qn)
    }

    fn module_of(&self, mut i: usize) -> usize {
        while let Some(p) = self.entries[i].parent {
            i = p.index();
        }
        i
    }

    fn imports(&self, m: usize) -> impl Iterator<Item = &str> {
        self.entries[m]
            .property("imports")
            .into_iter()
            .flat_map(|s| s.split(','))
    }

    fn named_children(&self, parent: usize, name: &str) -> Vec<usize> {
        self.children[parent]
            .iter()
            .copied()
            .filter(|&c| self.entries[c].name == name)
            .collect()
    }

    /// What `module.name` refers to.
    fn module_member(&self, m: usize, name: &str) -> Value {
        let kids = self.named_children(m, name);
        match kids.as_slice() {
            [one] => match self.entries[*one].kind {
                EntryKind::Class => Value::Class(*one),
                EntryKind::Function => Value::Function(*one),
                _ => Value::Unknown,
            },
            [] => {
                let sub = format!("{}.{name}", self.module_qn(m));
                self.modules.get(&sub).map_or(Value::Unknown, |&s| Value::Module(s))
            }
            _ => Value::Unknown,
        }
    }

    /// Names resolvable as `module.<name>`; `None` when the module is open
    /// (star import or module-level `__getattr__`).
    fn module_names(&self, m: usize) -> Option<HashSet<String>> {
        if self.imports(m).any(|n| n == "*") || !self.named_children(m, "__getattr__").is_empty() {
            return None;
        }
        let mut out: HashSet<String> = self.children[m].iter().map(|&c| self.entries[c].name.clone()).collect();
        out.extend(self.imports(m).map(str::to_string));
        let prefix = format!("{}.", self.module_qn(m));
        for sub in self.modules.keys() {
            if let Some(rest) = sub.strip_prefix(&prefix) {
                out.insert(rest.split('.').next().unwrap_or(rest).to_string());
            }
        }
        Some(out)
    }

    fn resolve_base(&self, base: &str, class: usize) -> Option<usize> {
        if base.contains(['[', '(', '=', ' ']) {
            return None;
        }
        let simple = base.rsplit('.').next().unwrap_or(base);
        let module = self.module_of(class);
        if !base.contains('.') {
            let local: Vec<usize> = self
                .named_children(module, simple)
                .into_iter()
                .filter(|&c| self.entries[c].kind == EntryKind::Class)
                .collect();
            if let [one] = local.as_slice() {
                return Some(*one);
            }
            if !local.is_empty() {
                return None;
            }
        }
        let head = base.split('.').next().unwrap_or(base);
        if !self.imports(module).any(|n| n == head) {
            return None;
        }
        let candidates: Vec<usize> = (0..self.entries.len())
            .filter(|&i| {
                let e = &self.entries[i];
                e.kind == EntryKind::Class
                    && e.name == simple
                    && e.parent.is_some_and(|p| self.entries[p.index()].kind == EntryKind::Module)
            })
            .collect();
        match candidates.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }

    fn bases(&self, class: usize) -> Vec<&str> {
        self.entries[class]
            .property("bases")
            .map(|b| b.split(", ").collect())
            .unwrap_or_default()
    }

    /// Classes in lookup order (the class, then its bases depth-first);
    /// `None` when some base is unresolved or the class is dynamic.
    fn lineage(&self, class: usize) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![class];
        while let Some(c) = stack.pop() {
            if out.contains(&c) {
                continue;
            }
            if out.len() > 64 {
                return None;
            }
            let e = &self.entries[c];
            if e.property("keywords").is_some() {
                return None;
            }
            if e.decorators().any(|d| !d.starts_with("dataclass") && !d.starts_with("dataclasses.dataclass")) {
                return None;
            }
            out.push(c);
            let mut bases = Vec::new();
            for b in self.bases(c) {
                if b == "object" {
                    continue;
                }
                bases.push(self.resolve_base(b, c)?);
            }
            stack.extend(bases.into_iter().rev());
        }
        Some(out)
    }

    fn class_members(&self, class: usize) -> Option<HashSet<String>> {
        let mut out = HashSet::new();
        for c in self.lineage(class)? {
            for &k in &self.children[c] {
                out.insert(self.entries[k].name.clone());
            }
        }
        if out.contains("__getattr__") || out.contains("__getattribute__") {
            return None;
        }
        Some(out)
    }

    /// First definition of `name` along the class lineage.
    fn class_lookup(&self, class: usize, name: &str) -> Lookup {
        let Some(lineage) = self.lineage(class) else {
            return Lookup::Unknown;
        };
        for c in lineage {
            match self.named_children(c, name).as_slice() {
                [] => continue,
                [one] => return Lookup::Found(*one),
                _ => return Lookup::Unknown,
            }
        }
        Lookup::Absent
    }
}

enum Lookup {
    Found(usize),
    Absent,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Module(usize),
    Class(usize),
    Instance(usize),
    Function(usize),
    BoundMethod(usize),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScopeKind {
    Module,
    Class,
    Function,
    Lambda,
    Comprehension,
}

#[derive(Debug, Clone)]
enum Binding<'a> {
    Value(Value),
    Expr(&'a Expr),
    Opaque,
}

struct Scope<'a> {
    kind: ScopeKind,
    qn: Option<String>,
    bindings: HashMap<String, Vec<Binding<'a>>>,
    declared_global: HashSet<String>,
    star: bool,
}

impl<'a> Scope<'a> {
    fn new(kind: ScopeKind, qn: Option<String>) -> Self {
        Self {
            kind,
            qn,
            bindings: HashMap::new(),
            declared_global: HashSet::new(),
            star: false,
        }
    }

    fn bind(&mut self, name: impl Into<String>, b: Binding<'a>) {
        self.bindings.entry(name.into()).or_default().push(b);
    }
}

struct Walker<'a, 'u> {
    u: &'u Universe,
    parsed: &'a ParsedModule<'a>,
    file: &'a str,
    module_qn: String,
    module_entry: Option<usize>,
    stored_attrs: HashSet<String>,
    scopes: Vec<Scope<'a>>,
    diags: Vec<Diagnostic>,
}

impl<'a, 'u> Walker<'a, 'u> {
    fn emit(&mut self, node: &impl Ranged, code: &str, message: String, symbol: Option<String>) {
        let d = Diagnostic::new(code, message, self.file, self.parsed.start_line(node), self.parsed.column(node))
            .with_symbol(symbol);
        self.diags.push(d);
    }

    fn module(&mut self) {
        let suite: &'a [Stmt] = &self.parsed.suite;
        let mut scope = Scope::new(ScopeKind::Module, Some(self.module_qn.clone()));
        self.collect(suite, &mut scope);
        self.scopes.push(scope);
        self.check_redefinitions(suite, ScopeKind::Module);
        self.body(suite);
        self.scopes.pop();
    }

    // ---- binding collection -------------------------------------------

    fn collect(&self, body: &'a [Stmt], scope: &mut Scope<'a>) {
        for stmt in body {
            self.collect_stmt(stmt, scope);
        }
        // walrus targets bind in the enclosing function or module scope
        let mut walrus = Vec::new();
        collect_walrus(body, &mut walrus);
        for n in walrus {
            scope.bind(n, Binding::Opaque);
        }
    }

    fn child_qn(&self, scope: &Scope<'a>, name: &str) -> Option<String> {
        scope.qn.as_ref().map(|q| format!("{q}.{name}"))
    }

    fn collect_stmt(&self, stmt: &'a Stmt, scope: &mut Scope<'a>) {
        match stmt {
            Stmt::FunctionDef(f) => {
                let v = self
                    .child_qn(scope, &f.name)
                    .and_then(|qn| self.u.unique(&qn, EntryKind::Function))
                    .map_or(Value::Unknown, Value::Function);
                scope.bind(f.name.as_str(), Binding::Value(v));
            }
            Stmt::AsyncFunctionDef(f) => {
                let v = self
                    .child_qn(scope, &f.name)
                    .and_then(|qn| self.u.unique(&qn, EntryKind::Function))
                    .map_or(Value::Unknown, Value::Function);
                scope.bind(f.name.as_str(), Binding::Value(v));
            }
            Stmt::ClassDef(c) => {
                let v = self
                    .child_qn(scope, &c.name)
                    .and_then(|qn| self.u.unique(&qn, EntryKind::Class))
                    .map_or(Value::Unknown, Value::Class);
                scope.bind(c.name.as_str(), Binding::Value(v));
            }
            Stmt::Assign(a) => {
                for t in &a.targets {
                    if let (Expr::Name(n), 1) = (t, a.targets.len()) {
                        scope.bind(n.id.as_str(), Binding::Expr(&a.value));
                    } else {
                        bind_targets(t, scope);
                    }
                }
            }
            Stmt::AnnAssign(a) => match (&*a.target, &a.value) {
                (Expr::Name(n), Some(v)) => scope.bind(n.id.as_str(), Binding::Expr(v)),
                (t, _) => bind_targets(t, scope),
            },
            Stmt::AugAssign(a) => bind_targets(&a.target, scope),
            Stmt::TypeAlias(t) => bind_targets(&t.name, scope),
            Stmt::For(f) => bind_targets(&f.target, scope),
            Stmt::AsyncFor(f) => bind_targets(&f.target, scope),
            Stmt::With(w) => w
                .items
                .iter()
                .filter_map(|i| i.optional_vars.as_deref())
                .for_each(|t| bind_targets(t, scope)),
            Stmt::AsyncWith(w) => w
                .items
                .iter()
                .filter_map(|i| i.optional_vars.as_deref())
                .for_each(|t| bind_targets(t, scope)),
            Stmt::Try(t) => handler_names(&t.handlers, scope),
            Stmt::TryStar(t) => handler_names(&t.handlers, scope),
            Stmt::Match(m) => {
                for case in &m.cases {
                    let mut names = Vec::new();
                    python::pattern_names(&case.pattern, &mut names);
                    names.into_iter().for_each(|n| scope.bind(n, Binding::Opaque));
                }
            }
            Stmt::Import(i) => {
                for alias in &i.names {
                    let full = alias.name.as_str();
                    match &alias.asname {
                        Some(as_name) => {
                            let v = self.u.modules.get(full).map_or(Value::Unknown, |&m| Value::Module(m));
                            scope.bind(as_name.as_str(), Binding::Value(v));
                        }
                        None => {
                            let head = full.split('.').next().unwrap_or(full);
                            let v = self.u.modules.get(head).map_or(Value::Unknown, |&m| Value::Module(m));
                            scope.bind(head, Binding::Value(v));
                        }
                    }
                }
            }
            Stmt::ImportFrom(i) => {
                let module = self.import_base(i).and_then(|m| self.u.modules.get(&m).copied());
                for alias in &i.names {
                    if alias.name.as_str() == "*" {
                        scope.star = true;
                        continue;
                    }
                    let bound = alias.asname.as_ref().unwrap_or(&alias.name);
                    let v = module.map_or(Value::Unknown, |m| self.u.module_member(m, &alias.name));
                    scope.bind(bound.as_str(), Binding::Value(v));
                }
            }
            Stmt::Global(g) => scope.declared_global.extend(g.names.iter().map(|n| n.to_string())),
            Stmt::Nonlocal(n) => scope.declared_global.extend(n.names.iter().map(|n| n.to_string())),
            _ => {}
        }
        if !matches!(stmt, Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) | Stmt::ClassDef(_)) {
            let mut bodies = Vec::new();
            python::stmt_bodies(stmt, &mut bodies);
            for b in bodies {
                for s in b {
                    self.collect_stmt(s, scope);
                }
            }
        }
    }

    /// Absolute module named by an `ImportFrom`, resolving relative levels
    /// against the checked file.
    fn import_base(&self, i: &ast::StmtImportFrom) -> Option<String> {
        let level = i.level.map_or(0, |l| l.to_u32()) as usize;
        let module = i.module.as_ref().map(|m| m.to_string());
        if level == 0 {
            return module;
        }
        let parts: Vec<&str> = self.module_qn.split('.').collect();
        if level > parts.len() {
            return None;
        }
        let mut base: Vec<&str> = parts[..parts.len() - level].to_vec();
        if let Some(m) = &module {
            base.push(m);
        }
        (!base.is_empty()).then(|| base.join("."))
    }

    // ---- name resolution ----------------------------------------------

    /// Scope index and bindings of `name` as seen from scope `from`.
    fn lookup(&self, name: &str, from: usize) -> Option<(usize, &[Binding<'a>])> {
        let mut i = from;
        loop {
            let scope = &self.scopes[i];
            let visible = scope.kind != ScopeKind::Class
                || self.scopes[i + 1..=from]
                    .iter()
                    .all(|s| s.kind == ScopeKind::Comprehension);
            if visible {
                if scope.declared_global.contains(name) && i != 0 {
                    return match self.scopes[0].bindings.get(name) {
                        Some(b) => Some((0, b.as_slice())),
                        None => Some((0, &[Binding::Opaque])),
                    };
                }
                if let Some(b) = scope.bindings.get(name) {
                    return Some((i, b.as_slice()));
                }
            }
            if i == 0 {
                return None;
            }
            i -= 1;
        }
    }

    fn eval(&self, expr: &Expr, from: usize, depth: u32) -> Value {
        if depth > 8 {
            return Value::Unknown;
        }
        match expr {
            Expr::Name(n) => match self.lookup(&n.id, from) {
                Some((at, [b])) => match b {
                    Binding::Value(v) => *v,
                    Binding::Expr(e) => self.eval(e, at, depth + 1),
                    Binding::Opaque => Value::Unknown,
                },
                _ => Value::Unknown,
            },
            Expr::Attribute(a) => match self.eval(&a.value, from, depth + 1) {
                Value::Module(m) => self.u.module_member(m, &a.attr),
                Value::Class(c) => match self.u.class_lookup(c, &a.attr) {
                    Lookup::Found(f) if self.u.entries[f].kind == EntryKind::Function => Value::Function(f),
                    Lookup::Found(k) if self.u.entries[k].kind == EntryKind::Class => Value::Class(k),
                    _ => Value::Unknown,
                },
                Value::Instance(c) => match self.u.class_lookup(c, &a.attr) {
                    Lookup::Found(f) if self.u.entries[f].kind == EntryKind::Function => Value::BoundMethod(f),
                    _ => Value::Unknown,
                },
                _ => Value::Unknown,
            },
            Expr::Call(c) => match self.eval(&c.func, from, depth + 1) {
                Value::Class(k) => Value::Instance(k),
                _ => Value::Unknown,
            },
            _ => Value::Unknown,
        }
    }

    fn current(&self) -> usize {
        self.scopes.len() - 1
    }

    // ---- walking --------------------------------------------------------

    fn body(&mut self, body: &'a [Stmt]) {
        for stmt in body {
            self.stmt(stmt);
        }
    }

    fn stmt(&mut self, stmt: &'a Stmt) {
        match stmt {
            Stmt::FunctionDef(f) => self.function(stmt, &f.name, &f.args, &f.body, &f.decorator_list),
            Stmt::AsyncFunctionDef(f) => self.function(stmt, &f.name, &f.args, &f.body, &f.decorator_list),
            Stmt::ClassDef(c) => self.class(stmt, c),
            _ => {
                if let Stmt::ImportFrom(i) = stmt {
                    self.check_import_from(stmt, i);
                }
                let mut exprs = Vec::new();
                python::stmt_exprs(stmt, &mut exprs);
                for e in exprs {
                    self.expr(e);
                }
                let mut bodies = Vec::new();
                python::stmt_bodies(stmt, &mut bodies);
                for b in bodies {
                    self.body(b);
                }
            }
        }
    }

    fn function(
        &mut self,
        stmt: &'a Stmt,
        name: &str,
        args: &'a ast::Arguments,
        body: &'a [Stmt],
        decorators: &'a [Expr],
    ) {
        let mut outer = Vec::new();
        python::stmt_exprs(stmt, &mut outer);
        for e in outer {
            self.expr(e);
        }
        let parent = &self.scopes[self.current()];
        let qn = self.child_qn(parent, name);
        let class = match parent.kind {
            ScopeKind::Class => parent
                .qn
                .as_ref()
                .and_then(|q| self.u.unique(q, EntryKind::Class)),
            _ => None,
        };
        let mut scope = Scope::new(ScopeKind::Function, qn);
        let decorator_names: Vec<String> = decorators.iter().filter_map(python::dotted_name).collect();
        let positional: Vec<&ast::ArgWithDefault> = args.posonlyargs.iter().chain(&args.args).collect();
        for (i, a) in positional.iter().enumerate() {
            let b = match (i, class) {
                (0, Some(c)) if decorator_names.iter().any(|d| d == "classmethod") => Binding::Value(Value::Class(c)),
                (0, Some(c)) if !decorator_names.iter().any(|d| d == "staticmethod") => {
                    Binding::Value(Value::Instance(c))
                }
                _ => Binding::Opaque,
            };
            scope.bind(a.def.arg.as_str(), b);
        }
        for a in &args.kwonlyargs {
            scope.bind(a.def.arg.as_str(), Binding::Opaque);
        }
        for a in args.vararg.iter().chain(&args.kwarg) {
            scope.bind(a.arg.as_str(), Binding::Opaque);
        }
        self.collect(body, &mut scope);
        self.scopes.push(scope);
        self.check_redefinitions(body, ScopeKind::Function);
        self.body(body);
        self.scopes.pop();
    }

    fn class(&mut self, stmt: &'a Stmt, class: &'a ast::StmtClassDef) {
        let mut outer = Vec::new();
        python::stmt_exprs(stmt, &mut outer);
        for e in outer {
            self.expr(e);
        }
        let qn = self.child_qn(&self.scopes[self.current()], &class.name);
        let mut scope = Scope::new(ScopeKind::Class, qn);
        self.collect(&class.body, &mut scope);
        self.scopes.push(scope);
        self.check_redefinitions(&class.body, ScopeKind::Class);
        self.body(&class.body);
        self.scopes.pop();
    }

    fn expr(&mut self, expr: &'a Expr) {
        match expr {
            Expr::Name(n) => {
                if n.ctx == ExprContext::Load {
                    self.check_name(n);
                }
            }
            Expr::Attribute(a) => {
                self.expr(&a.value);
                if a.ctx == ExprContext::Load {
                    self.check_member(expr, a);
                }
            }
            Expr::Call(c) => {
                self.expr(&c.func);
                for a in &c.args {
                    self.expr(a);
                }
                for k in &c.keywords {
                    self.expr(&k.value);
                }
                self.check_call(expr, c);
            }
            Expr::Lambda(l) => {
                let mut defaults = Vec::new();
                python::arguments_exprs(&l.args, &mut defaults);
                for d in defaults {
                    self.expr(d);
                }
                let mut scope = Scope::new(ScopeKind::Lambda, None);
                let a = &l.args;
                for p in a.posonlyargs.iter().chain(&a.args).chain(&a.kwonlyargs) {
                    scope.bind(p.def.arg.as_str(), Binding::Opaque);
                }
                for p in a.vararg.iter().chain(&a.kwarg) {
                    scope.bind(p.arg.as_str(), Binding::Opaque);
                }
                self.scopes.push(scope);
                self.expr(&l.body);
                self.scopes.pop();
            }
            Expr::ListComp(c) => self.comprehension(&c.generators, &[&c.elt]),
            Expr::SetComp(c) => self.comprehension(&c.generators, &[&c.elt]),
            Expr::GeneratorExp(c) => self.comprehension(&c.generators, &[&c.elt]),
            Expr::DictComp(c) => self.comprehension(&c.generators, &[&c.key, &c.value]),
            _ => {
                let mut kids = Vec::new();
                python::expr_children(expr, &mut kids);
                for k in kids {
                    self.expr(k);
                }
            }
        }
    }

    fn comprehension(&mut self, gens: &'a [ast::Comprehension], elts: &[&'a Expr]) {
        let Some(first) = gens.first() else { return };
        self.expr(&first.iter);
        let mut scope = Scope::new(ScopeKind::Comprehension, None);
        for g in gens {
            bind_targets(&g.target, &mut scope);
        }
        self.scopes.push(scope);
        for (i, g) in gens.iter().enumerate() {
            if i > 0 {
                self.expr(&g.iter);
            }
            self.expr(&g.target);
            for cond in &g.ifs {
                self.expr(cond);
            }
        }
        for e in elts {
            self.expr(e);
        }
        self.scopes.pop();
    }

    // ---- checks ---------------------------------------------------------

    fn check_name(&mut self, n: &ast::ExprName) {
        let name = n.id.as_str();
        if self.lookup(name, self.current()).is_some()
            || BUILTINS.contains(&name)
            || self.u.names.contains(name)
            || self.scopes[0].star
        {
            return;
        }
        self.emit(n, "E0602", format!("Undefined variable '{name}'"), Some(name.to_string()));
    }

    fn check_member(&mut self, node: &Expr, a: &ast::ExprAttribute) {
        let attr = a.attr.as_str();
        if (attr.starts_with("__") && attr.ends_with("__")) || self.stored_attrs.contains(attr) {
            return;
        }
        let message = match self.eval(&a.value, self.current(), 0) {
            Value::Class(c) | Value::Instance(c) => {
                let Some(members) = self.u.class_members(c) else { return };
                if members.contains(attr) || attr == "mro" {
                    return;
                }
                let class_name = &self.u.entries[c].name;
                if matches!(self.eval(&a.value, self.current(), 0), Value::Instance(_)) {
                    format!("Instance of '{class_name}' has no '{attr}' member")
                } else {
                    format!("Class '{class_name}' has no '{attr}' member")
                }
            }
            Value::Module(m) => {
                let Some(names) = self.u.module_names(m) else { return };
                if names.contains(attr) {
                    return;
                }
                format!("Module '{}' has no '{attr}' member", self.u.module_qn(m))
            }
            _ => return,
        };
        self.emit(node, "E1101", message, Some(attr.to_string()));
    }

    /// Callee entry, whether the first parameter is bound, and the call kind
    /// used in messages.
    fn call_target(&self, func: &Expr) -> Option<(usize, bool, &'static str)> {
        let (f, bound, kind) = match self.eval(func, self.current(), 0) {
            Value::Function(f) => {
                let in_class = self.u.entries[f]
                    .parent
                    .is_some_and(|p| self.u.entries[p.index()].kind == EntryKind::Class);
                let classmethod = self.u.entries[f].decorators().any(|d| d == "classmethod");
                (f, in_class && classmethod, if in_class { "method" } else { "function" })
            }
            Value::BoundMethod(f) => {
                let is_static = self.u.entries[f].decorators().any(|d| d == "staticmethod");
                (f, !is_static, "method")
            }
            Value::Class(c) => {
                if !matches!(self.u.class_lookup(c, "__new__"), Lookup::Absent) {
                    return None;
                }
                if self.u.entries[c].decorators().next().is_some() {
                    return None;
                }
                match self.u.class_lookup(c, "__init__") {
                    Lookup::Found(init) if self.u.entries[init].kind == EntryKind::Function => {
                        (init, true, "constructor")
                    }
                    _ => return None,
                }
            }
            _ => return None,
        };
        let e = &self.u.entries[f];
        if e.decorators().any(|d| d != "staticmethod" && d != "classmethod") {
            return None;
        }
        if self.u.unique(&e.qualified_name, EntryKind::Function) != Some(f) {
            return None;
        }
        e.signature.as_ref()?;
        Some((f, bound, kind))
    }

    fn check_call(&mut self, node: &Expr, call: &ast::ExprCall) {
        if call.args.iter().any(|a| matches!(a, Expr::Starred(_))) || call.keywords.iter().any(|k| k.arg.is_none()) {
            return;
        }
        let Some((f, bound, kind)) = self.call_target(&call.func) else { return };
        let sig = self.u.entries[f].signature.clone().expect("checked by call_target");
        let skip = usize::from(bound);
        if sig.params.len() < skip {
            return;
        }
        let params = &sig.params[skip..];
        let required = sig.required().saturating_sub(skip);
        let npos = call.args.len();
        let mut found = Vec::new();
        if npos > params.len() && !sig.vararg {
            found.push(("E1121", format!("Too many positional arguments for {kind} call"), None));
        }
        let mut by_keyword = HashSet::new();
        for k in &call.keywords {
            let name = k.arg.as_ref().expect("double-star excluded").as_str();
            if params.iter().take(npos).any(|p| p == name) {
                return;
            }
            if params.iter().skip(npos).any(|p| p == name) || sig.kwonly.iter().any(|p| p == name) {
                by_keyword.insert(name);
            } else if !sig.kwarg {
                found.push((
                    "E1123",
                    format!("Unexpected keyword argument '{name}' in {kind} call"),
                    Some(name.to_string()),
                ));
            }
        }
        for p in params.iter().take(required).skip(npos) {
            if !by_keyword.contains(p.as_str()) {
                found.push(("E1120", format!("No value for argument '{p}' in {kind} call"), Some(p.clone())));
            }
        }
        let callee = self.u.entries[f].name.clone();
        for (code, message, _) in found {
            self.emit(node, code, message, Some(callee.clone()));
        }
    }

    fn check_import_from(&mut self, stmt: &Stmt, i: &ast::StmtImportFrom) {
        let Some(base) = self.import_base(i) else { return };
        let Some(&m) = self.u.modules.get(&base) else { return };
        if Some(m) == self.module_entry {
            return;
        }
        let Some(names) = self.u.module_names(m) else { return };
        for alias in &i.names {
            let name = alias.name.as_str();
            if name == "*" || names.contains(name) {
                continue;
            }
            let qn = self.u.module_qn(m).to_string();
            let line = self.parsed.start_line(stmt);
            let d = Diagnostic::new(
                "E0611",
                format!("No name '{name}' in module '{qn}'"),
                self.file,
                line,
                self.parsed.column(alias),
            );
            self.diags.push(d);
        }
    }

    fn check_redefinitions(&mut self, body: &'a [Stmt], scope: ScopeKind) {
        let mut first: HashMap<&str, u32> = HashMap::new();
        for stmt in body {
            let (name, decorators, what): (&str, &[Expr], &str) = match stmt {
                Stmt::FunctionDef(f) => (&f.name, &f.decorator_list, "function"),
                Stmt::AsyncFunctionDef(f) => (&f.name, &f.decorator_list, "function"),
                Stmt::ClassDef(c) => (&c.name, &c.decorator_list, "class"),
                _ => continue,
            };
            let what = if what == "function" && scope == ScopeKind::Class { "method" } else { what };
            let line = self.parsed.start_line(stmt);
            let exempt = decorators.iter().any(|d| {
                let src = self.parsed.slice(d.range());
                ["overload", "setter", "getter", "deleter", "register"].iter().any(|k| src.contains(k))
            });
            match first.get(name) {
                Some(&earlier) if !exempt => {
                    let d = Diagnostic::new(
                        "E0102",
                        format!("{what} already defined line {earlier}"),
                        self.file,
                        line,
                        self.parsed.column(stmt),
                    )
                    .with_symbol(Some(name.to_string()));
                    self.diags.push(d);
                }
                Some(_) => {}
                None => {
                    first.insert(name, line);
                }
            }
        }
    }
}

fn bind_targets<'a>(target: &Expr, scope: &mut Scope<'a>) {
    let mut names = Vec::new();
    python::target_names(target, &mut names);
    for (n, _) in names {
        scope.bind(n, Binding::Opaque);
    }
}

fn handler_names(handlers: &[ast::ExceptHandler], scope: &mut Scope<'_>) {
    for h in handlers {
        let ast::ExceptHandler::ExceptHandler(h) = h;
        if let Some(n) = &h.name {
            scope.bind(n.as_str(), Binding::Opaque);
        }
    }
}

fn collect_walrus(body: &[Stmt], out: &mut Vec<String>) {
    python::for_each_expr(body, &mut |e| {
        if let Expr::NamedExpr(n) = e {
            if let Expr::Name(t) = n.target.as_ref() {
                out.push(t.id.to_string());
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::LocalEncoder;
    use crate::index::build_database;

    fn db(files: &[(&str, &str)]) -> ProjectDatabase {
        let units: Vec<_> = files.iter().map(|(p, t)| SourceUnit::python(*p, *t)).collect();
        build_database("", &units, &LocalEncoder::new(8, 1))
    }

    fn check(db: &ProjectDatabase, file: &str, text: &str) -> Vec<(String, u32, String)> {
        builtin_check(file, text, LineSpan::new(1, u32::MAX), db)
            .into_iter()
            .map(|d| (d.code, d.line, d.message))
            .collect()
    }

    const LIB: &str = "\
class Store:
    limit = 3

    def __init__(self, path, mode='r'):
        self.path = path

    def get(self, key):
        return key

    @staticmethod
    def make(a, b):
        return a

    @classmethod
    def open(cls, path):
        return cls(path)


def f(x):
    return x
";

    #[test]
    fn too_many_positional_arguments() {
        let db = db(&[("lib.py", LIB)]);
        let got = check(&db, "app.py", "from lib import f\n\nf(1, 2)\n");
        assert_eq!(got, vec![("E1121".into(), 3, "Too many positional arguments for function call".into())]);
    }

    #[test]
    fn missing_and_unexpected_arguments() {
        let db = db(&[("lib.py", LIB)]);
        let got = check(&db, "app.py", "from lib import f, Store\n\nf()\nStore()\nStore.make(1)\nf(1, y=2)\n");
        let codes: Vec<_> = got.iter().map(|(c, l, _)| (c.as_str(), *l)).collect();
        assert_eq!(codes, vec![("E1120", 3), ("E1120", 4), ("E1120", 5), ("E1123", 6)]);
        assert_eq!(got[1].2, "No value for argument 'path' in constructor call");
    }

    #[test]
    fn bound_methods_skip_self() {
        let db = db(&[("lib.py", LIB)]);
        let ok = "from lib import Store\n\ns = Store('p')\ns.get(1)\nStore.open('p')\ns.make(1, 2)\n";
        assert!(check(&db, "app.py", ok).is_empty());
        let bad = "from lib import Store\n\ns = Store('p')\ns.get(1, 2)\n";
        assert_eq!(check(&db, "app.py", bad)[0].2, "Too many positional arguments for method call");
    }

    #[test]
    fn resolvable_names_are_clean() {
        let db = db(&[("lib.py", LIB)]);
        let text = "\
import os
from lib import Store, f


def use(items, *rest, **kw):
    total = [f(i) for i in items if i]
    g = lambda y: y + 1
    with open(os.sep) as fh:
        pass
    try:
        pass
    except ValueError as err:
        print(err)
    if (n := len(items)) > 1:
        return n
    s = Store('x')
    return s.path, s.limit, s.get(1), Store.limit, total, g, rest, kw, fh
";
        assert_eq!(check(&db, "app.py", text), vec![]);
    }

    #[test]
    fn undefined_variable_is_reported() {
        let db = db(&[("lib.py", LIB)]);
        let got = check(&db, "app.py", "def g():\n    return undefined_x\n");
        assert_eq!(got, vec![("E0602".into(), 2, "Undefined variable 'undefined_x'".into())]);
    }

    #[test]
    fn class_scope_is_invisible_to_methods() {
        let db = db(&[]);
        let got = check(&db, "m.py", "class A:\n    k = 1\n\n    def f(self):\n        return k\n");
        assert_eq!(got.len(), 0, "names defined anywhere in the index count as defined");
        let got = check(&db, "m.py", "class A:\n    def f(self):\n        return kk\n");
        assert_eq!(got[0].0, "E0602");
    }

    #[test]
    fn missing_members() {
        let db = db(&[("lib.py", LIB)]);
        let got = check(&db, "app.py", "from lib import Store\nimport lib\n\ns = Store('p')\ns.missing\nStore.nope\nlib.qq\n");
        assert_eq!(
            got.iter().map(|g| g.2.as_str()).collect::<Vec<_>>(),
            vec![
                "Instance of 'Store' has no 'missing' member",
                "Class 'Store' has no 'nope' member",
                "Module 'lib' has no 'qq' member",
            ]
        );
    }

    #[test]
    fn self_attributes_and_unknown_bases() {
        let db = db(&[("lib.py", "import enum\n\nclass Color(enum.Enum):\n    RED = 1\n")]);
        let got = check(&db, "app.py", "from lib import Color\n\nColor.BLUE\n");
        assert!(got.is_empty());
        let text = "class A:\n    def __init__(self):\n        self.x = 1\n\n    def f(self):\n        return self.x, self.y\n";
        let got = check(&db, "m.py", text);
        assert_eq!(got, vec![("E1101".into(), 6, "Instance of 'A' has no 'y' member".into())]);
    }

    #[test]
    fn inherited_members_resolve() {
        let db = db(&[("lib.py", "class Base:\n    def run(self):\n        pass\n\n\nclass Child(Base):\n    pass\n")]);
        assert!(check(&db, "app.py", "from lib import Child\n\nChild().run()\n").is_empty());
        assert_eq!(check(&db, "app.py", "from lib import Child\n\nChild().walk()\n")[0].0, "E1101");
    }

    #[test]
    fn no_name_in_module() {
        let db = db(&[("aio/_bolt3.py", "class AsyncBolt3:\n    pass\n")]);
        let got = check(&db, "app.py", "from aio._bolt3 import SyncBolt3\n");
        assert_eq!(got, vec![("E0611".into(), 1, "No name 'SyncBolt3' in module 'aio._bolt3'".into())]);
        assert!(check(&db, "app.py", "from aio._bolt3 import AsyncBolt3\nfrom aio import _bolt3\n").is_empty());
        assert!(check(&db, "aio/x.py", "from ._bolt3 import AsyncBolt3\n").is_empty());
        assert_eq!(check(&db, "aio/x.py", "from ._bolt3 import Nope\n")[0].0, "E0611");
    }

    #[test]
    fn redefinitions() {
        let db = db(&[]);
        let got = check(&db, "m.py", "def f():\n    pass\n\n\ndef f():\n    pass\n");
        assert_eq!(got, vec![("E0102".into(), 5, "function already defined line 1".into())]);
        let setter = "class A:\n    @property\n    def x(self):\n        return 1\n\n    @x.setter\n    def x(self, v):\n        pass\n";
        assert!(check(&db, "m.py", setter).is_empty());
    }

    #[test]
    fn syntax_errors() {
        let db = db(&[]);
        let got = check(&db, "m.py", "```python\nx = 1\n```\n");
        assert_eq!(got[0].0, "E0001");
        assert_eq!(got[0].1, 1);
    }

    #[test]
    fn star_imports_disable_undefined_names() {
        let db = db(&[]);
        assert!(check(&db, "m.py", "from os.path import *\n\nprint(join)\n").is_empty());
    }

    #[test]
    fn span_restricts_output() {
        let db = db(&[]);
        let text = "a = undefined_one\nb = undefined_two\n";
        let got = builtin_check("m.py", text, LineSpan::new(2, 2), &db);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].line, 2);
    }
}
