//! Thin layer over the Python parser: parsing with line-resolved errors,
//! offset→line mapping, and a few AST helpers shared by the indexer and the
//! built-in checker.

use rustpython_parser::ast::{self, Ranged};
use rustpython_parser::text_size::TextRange;
use rustpython_parser::Parse;

pub use rustpython_parser::ast::{Expr, Stmt, Suite};

/// Byte offset → 1-based line lookup.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self {
            starts,
            len: text.len(),
        }
    }

    pub fn line_of(&self, offset: usize) -> u32 {
        let offset = offset.min(self.len);
        match self.starts.binary_search(&offset) {
            Ok(i) => i as u32 + 1,
            Err(i) => i as u32,
        }
    }

    /// 0-based byte column of `offset` on its line.
    pub fn column_of(&self, offset: usize) -> u32 {
        let line = self.line_of(offset) as usize;
        (offset.min(self.len) - self.starts[line - 1]) as u32
    }

    /// Last line touched by a range whose exclusive end is `end`.
    pub fn end_line_of(&self, start: usize, end: usize) -> u32 {
        if end > start {
            self.line_of(end - 1)
        } else {
            self.line_of(start)
        }
    }

    pub fn line_count(&self) -> u32 {
        // a trailing newline does not open a new line
        if self.len > 0 && *self.starts.last().unwrap() == self.len {
            self.starts.len() as u32 - 1
        } else {
            self.starts.len() as u32
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl std::fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (line {})", self.message, self.line)
    }
}

pub struct ParsedModule<'src> {
    pub text: &'src str,
    pub suite: Suite,
    pub lines: LineIndex,
}

impl<'src> ParsedModule<'src> {
    pub fn parse(text: &'src str, path: &str) -> Result<Self, SyntaxError> {
        let lines = LineIndex::new(text);
        match ast::Suite::parse(text, path) {
            Ok(suite) => Ok(Self { text, suite, lines }),
            Err(err) => {
                let offset = usize::from(err.offset);
                let message = match &err.error {
                    rustpython_parser::ParseErrorType::Lexical(e) => e.to_string(),
                    other => other.to_string(),
                };
                Err(SyntaxError {
                    line: lines.line_of(offset),
                    column: lines.column_of(offset),
                    message,
                })
            }
        }
    }

    pub fn slice(&self, range: TextRange) -> &'src str {
        &self.text[usize::from(range.start())..usize::from(range.end())]
    }

    pub fn start_line(&self, node: &impl Ranged) -> u32 {
        self.lines.line_of(usize::from(node.start()))
    }

    pub fn end_line(&self, node: &impl Ranged) -> u32 {
        self.lines
            .end_line_of(usize::from(node.start()), usize::from(node.end()))
    }

    pub fn column(&self, node: &impl Ranged) -> u32 {
        self.lines.column_of(usize::from(node.start()))
    }
}

/// Docstring of a body, cleaned like `inspect.cleandoc`.
pub fn docstring(body: &[Stmt]) -> Option<String> {
    let first = body.first()?;
    let Stmt::Expr(e) = first else { return None };
    let Expr::Constant(c) = e.value.as_ref() else {
        return None;
    };
    let ast::Constant::Str(s) = &c.value else {
        return None;
    };
    Some(clean_doc(s))
}

pub fn clean_doc(raw: &str) -> String {
    let lines: Vec<&str> = raw.lines().collect();
    let indent = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        if i == 0 {
            out.push(l.trim().to_string());
        } else if l.len() >= indent {
            out.push(l[indent..].trim_end().to_string());
        } else {
            out.push(l.trim().to_string());
        }
    }
    while out.first().is_some_and(|l| l.is_empty()) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}

/// Names bound by an assignment target (`a`, `a, b`, `[a, *b]`).
pub fn target_names(target: &Expr, out: &mut Vec<(String, TextRange)>) {
    match target {
        Expr::Name(n) => out.push((n.id.to_string(), n.range)),
        Expr::Tuple(t) => t.elts.iter().for_each(|e| target_names(e, out)),
        Expr::List(l) => l.elts.iter().for_each(|e| target_names(e, out)),
        Expr::Starred(s) => target_names(&s.value, out),
        _ => {}
    }
}

/// Dotted source form of a `Name`/`Attribute` chain, e.g. `os.path.join`.
pub fn dotted_name(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => dotted_name(&a.value).map(|base| format!("{base}.{}", a.attr)),
        _ => None,
    }
}

/// Expressions directly owned by a statement (not those of nested bodies).
pub fn stmt_exprs<'a>(stmt: &'a Stmt, out: &mut Vec<&'a Expr>) {
    match stmt {
        Stmt::FunctionDef(f) => {
            out.extend(&f.decorator_list);
            arguments_exprs(&f.args, out);
            out.extend(f.returns.as_deref());
        }
        Stmt::AsyncFunctionDef(f) => {
            out.extend(&f.decorator_list);
            arguments_exprs(&f.args, out);
            out.extend(f.returns.as_deref());
        }
        Stmt::ClassDef(c) => {
            out.extend(&c.decorator_list);
            out.extend(&c.bases);
            out.extend(c.keywords.iter().map(|k| &k.value));
        }
        Stmt::Return(r) => out.extend(r.value.as_deref()),
        Stmt::Delete(d) => out.extend(&d.targets),
        Stmt::Assign(a) => {
            out.extend(&a.targets);
            out.push(&a.value);
        }
        Stmt::TypeAlias(t) => {
            out.push(&t.name);
            out.push(&t.value);
        }
        Stmt::AugAssign(a) => {
            out.push(&a.target);
            out.push(&a.value);
        }
        Stmt::AnnAssign(a) => {
            out.push(&a.target);
            out.push(&a.annotation);
            out.extend(a.value.as_deref());
        }
        Stmt::For(f) => {
            out.push(&f.target);
            out.push(&f.iter);
        }
        Stmt::AsyncFor(f) => {
            out.push(&f.target);
            out.push(&f.iter);
        }
        Stmt::While(w) => out.push(&w.test),
        Stmt::If(i) => out.push(&i.test),
        Stmt::With(w) => {
            for item in &w.items {
                out.push(&item.context_expr);
                out.extend(item.optional_vars.as_deref());
            }
        }
        Stmt::AsyncWith(w) => {
            for item in &w.items {
                out.push(&item.context_expr);
                out.extend(item.optional_vars.as_deref());
            }
        }
        Stmt::Match(m) => {
            out.push(&m.subject);
            for case in &m.cases {
                pattern_exprs(&case.pattern, out);
                out.extend(case.guard.as_deref());
            }
        }
        Stmt::Raise(r) => {
            out.extend(r.exc.as_deref());
            out.extend(r.cause.as_deref());
        }
        Stmt::Try(t) => {
            for h in &t.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                out.extend(h.type_.as_deref());
            }
        }
        Stmt::TryStar(t) => {
            for h in &t.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                out.extend(h.type_.as_deref());
            }
        }
        Stmt::Assert(a) => {
            out.push(&a.test);
            out.extend(a.msg.as_deref());
        }
        Stmt::Expr(e) => out.push(&e.value),
        Stmt::Import(_)
        | Stmt::ImportFrom(_)
        | Stmt::Global(_)
        | Stmt::Nonlocal(_)
        | Stmt::Pass(_)
        | Stmt::Break(_)
        | Stmt::Continue(_) => {}
    }
}

/// Statement lists nested in a statement, in source order.
pub fn stmt_bodies<'a>(stmt: &'a Stmt, out: &mut Vec<&'a [Stmt]>) {
    match stmt {
        Stmt::FunctionDef(f) => out.push(&f.body),
        Stmt::AsyncFunctionDef(f) => out.push(&f.body),
        Stmt::ClassDef(c) => out.push(&c.body),
        Stmt::For(f) => out.extend([&f.body[..], &f.orelse[..]]),
        Stmt::AsyncFor(f) => out.extend([&f.body[..], &f.orelse[..]]),
        Stmt::While(w) => out.extend([&w.body[..], &w.orelse[..]]),
        Stmt::If(i) => out.extend([&i.body[..], &i.orelse[..]]),
        Stmt::With(w) => out.push(&w.body),
        Stmt::AsyncWith(w) => out.push(&w.body),
        Stmt::Match(m) => out.extend(m.cases.iter().map(|c| &c.body[..])),
        Stmt::Try(t) => {
            out.push(&t.body);
            for h in &t.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                out.push(&h.body);
            }
            out.extend([&t.orelse[..], &t.finalbody[..]]);
        }
        Stmt::TryStar(t) => {
            out.push(&t.body);
            for h in &t.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                out.push(&h.body);
            }
            out.extend([&t.orelse[..], &t.finalbody[..]]);
        }
        _ => {}
    }
}

/// Defaults and annotations of a parameter list.
pub fn arguments_exprs<'a>(args: &'a ast::Arguments, out: &mut Vec<&'a Expr>) {
    for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
        out.extend(a.def.annotation.as_deref());
        out.extend(a.default.as_deref());
    }
    for a in args.vararg.iter().chain(&args.kwarg) {
        out.extend(a.annotation.as_deref());
    }
}

/// Value expressions inside a match pattern.
pub fn pattern_exprs<'a>(pattern: &'a ast::Pattern, out: &mut Vec<&'a Expr>) {
    use ast::Pattern as P;
    match pattern {
        P::MatchValue(v) => out.push(&v.value),
        P::MatchSingleton(_) | P::MatchStar(_) => {}
        P::MatchSequence(s) => s.patterns.iter().for_each(|p| pattern_exprs(p, out)),
        P::MatchMapping(m) => {
            out.extend(&m.keys);
            m.patterns.iter().for_each(|p| pattern_exprs(p, out));
        }
        P::MatchClass(c) => {
            out.push(&c.cls);
            c.patterns.iter().chain(&c.kwd_patterns).for_each(|p| pattern_exprs(p, out));
        }
        P::MatchAs(a) => {
            if let Some(p) = &a.pattern {
                pattern_exprs(p, out);
            }
        }
        P::MatchOr(o) => o.patterns.iter().for_each(|p| pattern_exprs(p, out)),
    }
}

/// Names captured by a match pattern.
pub fn pattern_names(pattern: &ast::Pattern, out: &mut Vec<String>) {
    use ast::Pattern as P;
    match pattern {
        P::MatchValue(_) | P::MatchSingleton(_) => {}
        P::MatchStar(s) => out.extend(s.name.iter().map(|n| n.to_string())),
        P::MatchSequence(s) => s.patterns.iter().for_each(|p| pattern_names(p, out)),
        P::MatchMapping(m) => {
            m.patterns.iter().for_each(|p| pattern_names(p, out));
            out.extend(m.rest.iter().map(|n| n.to_string()));
        }
        P::MatchClass(c) => c.patterns.iter().chain(&c.kwd_patterns).for_each(|p| pattern_names(p, out)),
        P::MatchAs(a) => {
            if let Some(p) = &a.pattern {
                pattern_names(p, out);
            }
            out.extend(a.name.iter().map(|n| n.to_string()));
        }
        P::MatchOr(o) => o.patterns.iter().for_each(|p| pattern_names(p, out)),
    }
}

/// Immediate subexpressions, including comprehension parts and lambda
/// bodies.
pub fn expr_children<'a>(expr: &'a Expr, out: &mut Vec<&'a Expr>) {
    fn comps<'a>(gens: &'a [ast::Comprehension], out: &mut Vec<&'a Expr>) {
        for g in gens {
            out.push(&g.target);
            out.push(&g.iter);
            out.extend(&g.ifs);
        }
    }
    match expr {
        Expr::BoolOp(b) => out.extend(&b.values),
        Expr::NamedExpr(n) => {
            out.push(&n.target);
            out.push(&n.value);
        }
        Expr::BinOp(b) => {
            out.push(&b.left);
            out.push(&b.right);
        }
        Expr::UnaryOp(u) => out.push(&u.operand),
        Expr::Lambda(l) => {
            arguments_exprs(&l.args, out);
            out.push(&l.body);
        }
        Expr::IfExp(i) => {
            out.push(&i.test);
            out.push(&i.body);
            out.push(&i.orelse);
        }
        Expr::Dict(d) => {
            out.extend(d.keys.iter().flatten());
            out.extend(&d.values);
        }
        Expr::Set(s) => out.extend(&s.elts),
        Expr::ListComp(c) => {
            comps(&c.generators, out);
            out.push(&c.elt);
        }
        Expr::SetComp(c) => {
            comps(&c.generators, out);
            out.push(&c.elt);
        }
        Expr::GeneratorExp(c) => {
            comps(&c.generators, out);
            out.push(&c.elt);
        }
        Expr::DictComp(c) => {
            comps(&c.generators, out);
            out.push(&c.key);
            out.push(&c.value);
        }
        Expr::Await(a) => out.push(&a.value),
        Expr::Yield(y) => out.extend(y.value.as_deref()),
        Expr::YieldFrom(y) => out.push(&y.value),
        Expr::Compare(c) => {
            out.push(&c.left);
            out.extend(&c.comparators);
        }
        Expr::Call(c) => {
            out.push(&c.func);
            out.extend(&c.args);
            out.extend(c.keywords.iter().map(|k| &k.value));
        }
        Expr::FormattedValue(f) => {
            out.push(&f.value);
            out.extend(f.format_spec.as_deref());
        }
        Expr::JoinedStr(j) => out.extend(&j.values),
        Expr::Constant(_) | Expr::Name(_) => {}
        Expr::Attribute(a) => out.push(&a.value),
        Expr::Subscript(s) => {
            out.push(&s.value);
            out.push(&s.slice);
        }
        Expr::Starred(s) => out.push(&s.value),
        Expr::List(l) => out.extend(&l.elts),
        Expr::Tuple(t) => out.extend(&t.elts),
        Expr::Slice(s) => {
            out.extend(s.lower.as_deref());
            out.extend(s.upper.as_deref());
            out.extend(s.step.as_deref());
        }
    }
}

/// Calls `f` on every expression in `body`, nested bodies included.
pub fn for_each_expr<'a>(body: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
    fn expr<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
        f(e);
        let mut kids = Vec::new();
        expr_children(e, &mut kids);
        for k in kids {
            expr(k, f);
        }
    }
    for stmt in body {
        let mut exprs = Vec::new();
        stmt_exprs(stmt, &mut exprs);
        for e in exprs {
            expr(e, f);
        }
        let mut bodies = Vec::new();
        stmt_bodies(stmt, &mut bodies);
        for b in bodies {
            for_each_expr(b, f);
        }
    }
}
