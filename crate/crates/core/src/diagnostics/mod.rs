//! Checker findings: the error taxonomy, message parsing, restriction to the
//! generated lines, and the two checkers (external analyzer, built-in).

mod builtin;
mod external;
mod workspace;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::ProjectDatabase;
use crate::span::LineSpan;

pub use builtin::{builtin_check, BuiltinChecker};
pub use external::{parse_analyzer_output, run_external_checker, ExternalChecker, CHECKER_ENV, DEFAULT_ANALYZER};
pub use workspace::materialize_project;

/// Code carried by test-execution failures. Never produced by a checker.
pub const FUNC_CODE: &str = "FUNC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ErrorCategory {
    Undef,
    Api,
    Object,
    Other,
    Func,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Undef,
        ErrorCategory::Api,
        ErrorCategory::Object,
        ErrorCategory::Other,
        ErrorCategory::Func,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Undef => "UNDEF",
            ErrorCategory::Api => "API",
            ErrorCategory::Object => "OBJECT",
            ErrorCategory::Other => "OTHER",
            ErrorCategory::Func => "FUNC",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorSubtype {
    #[serde(rename = "UNDEF-P")]
    UndefP,
    #[serde(rename = "UNDEF-CM")]
    UndefCm,
    #[serde(rename = "UNDEF-API")]
    UndefApi,
    #[serde(rename = "UNDEF-O")]
    UndefO,
    #[serde(rename = "API-TMA")]
    ApiTma,
    #[serde(rename = "API-IA")]
    ApiIa,
    #[serde(rename = "API-WA")]
    ApiWa,
    #[serde(rename = "OBJ-NI")]
    ObjNi,
    #[serde(rename = "OBJ-NC")]
    ObjNc,
    #[serde(rename = "OBJ-NS")]
    ObjNs,
}

impl ErrorSubtype {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorSubtype::UndefP => "UNDEF-P",
            ErrorSubtype::UndefCm => "UNDEF-CM",
            ErrorSubtype::UndefApi => "UNDEF-API",
            ErrorSubtype::UndefO => "UNDEF-O",
            ErrorSubtype::ApiTma => "API-TMA",
            ErrorSubtype::ApiIa => "API-IA",
            ErrorSubtype::ApiWa => "API-WA",
            ErrorSubtype::ObjNi => "OBJ-NI",
            ErrorSubtype::ObjNc => "OBJ-NC",
            ErrorSubtype::ObjNs => "OBJ-NS",
        }
    }

    pub fn category(self) -> ErrorCategory {
        match self {
            ErrorSubtype::UndefP | ErrorSubtype::UndefCm | ErrorSubtype::UndefApi | ErrorSubtype::UndefO => {
                ErrorCategory::Undef
            }
            ErrorSubtype::ApiTma | ErrorSubtype::ApiIa | ErrorSubtype::ApiWa => ErrorCategory::Api,
            ErrorSubtype::ObjNi | ErrorSubtype::ObjNc | ErrorSubtype::ObjNs => ErrorCategory::Object,
        }
    }
}

impl fmt::Display for ErrorSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Checker codes with a taxonomy subtype. Every other code is OTHER.
pub const TAXONOMY: [(&str, ErrorSubtype); 11] = [
    ("E0401", ErrorSubtype::UndefP),
    ("E1101", ErrorSubtype::UndefCm),
    ("E0611", ErrorSubtype::UndefApi),
    ("E0602", ErrorSubtype::UndefO),
    ("E1121", ErrorSubtype::ApiTma),
    ("E1120", ErrorSubtype::ApiIa),
    ("E1111", ErrorSubtype::ApiWa),
    ("E1123", ErrorSubtype::ApiWa),
    ("E1133", ErrorSubtype::ObjNi),
    ("E1102", ErrorSubtype::ObjNc),
    ("E1136", ErrorSubtype::ObjNs),
];

/// Category and subtype for a static checker code. Total: unknown codes
/// are OTHER. FUNC is never returned here.
pub fn classify(code: &str) -> (ErrorCategory, Option<ErrorSubtype>) {
    TAXONOMY
        .iter()
        .find(|(c, _)| *c == code)
        .map_or((ErrorCategory::Other, None), |(_, s)| (s.category(), Some(*s)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    pub file: String,
    pub line: u32,
    pub column: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    pub category: ErrorCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<ErrorSubtype>,
}

impl Diagnostic {
    /// A static checker finding; category, subtype and symbol are derived
    /// from the code and message.
    pub fn new(code: impl Into<String>, message: impl Into<String>, file: impl Into<String>, line: u32, column: u32) -> Self {
        let code = code.into();
        let message = message.into();
        let (category, subtype) = classify(&code);
        let symbol = parse_message(&code, &message).symbol;
        Self {
            code,
            message,
            file: file.into(),
            line: line.max(1),
            column,
            symbol,
            category,
            subtype,
        }
    }

    /// A failed or timed-out test run.
    pub fn functional(message: impl Into<String>, file: impl Into<String>, line: u32) -> Self {
        Self {
            code: FUNC_CODE.into(),
            message: message.into(),
            file: file.into(),
            line: line.max(1),
            column: 0,
            symbol: None,
            category: ErrorCategory::Func,
            subtype: None,
        }
    }

    pub fn with_symbol(mut self, symbol: Option<String>) -> Self {
        if symbol.is_some() {
            self.symbol = symbol;
        }
        self
    }

    /// Category agrees with the fixed code mapping.
    pub fn is_consistent(&self) -> bool {
        if self.code == FUNC_CODE {
            return self.category == ErrorCategory::Func && self.subtype.is_none();
        }
        (self.category, self.subtype) == classify(&self.code)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {} {}", self.file, self.line, self.column, self.code, self.message)
    }
}

/// Runtime/test failures stay out of the repair loop.
pub fn is_repairable(diag: &Diagnostic) -> bool {
    diag.category != ErrorCategory::Func
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OwnerKind {
    Instance,
    Class,
    Module,
}

/// What a message says about the offending name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageParts {
    pub symbol: Option<String>,
    /// For member errors: the class or module lacking the member.
    pub owner: Option<(OwnerKind, String)>,
}

struct Patterns {
    quoted: Regex,
    member: Regex,
    no_name: Regex,
    call_target: Regex,
    not_callable: Regex,
    non_iterable: Regex,
    method: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        quoted: Regex::new(r"'([^']+)'").unwrap(),
        member: Regex::new(r"^(Instance of|Class|Module) '([^']+)' has no '([^']+)' member").unwrap(),
        no_name: Regex::new(r"^No name '([^']+)' (?:found )?in module '([^']+)'").unwrap(),
        call_target: Regex::new(r"(?:function|method|constructor) call '([^']+)'").unwrap(),
        not_callable: Regex::new(r"^'?([A-Za-z_][\w.]*)'? is not callable").unwrap(),
        non_iterable: Regex::new(r"^Non-(?:iterable|mapping) value '?([A-Za-z_][\w.]*)'? is used").unwrap(),
        method: Regex::new(r"^Method '([^']+)'").unwrap(),
    })
}

/// Pulls the identifier(s) a checker message is about.
pub fn parse_message(code: &str, message: &str) -> MessageParts {
    let p = patterns();
    let first_quoted = || p.quoted.captures(message).map(|c| c[1].to_string());
    match code {
        "E1101" => match p.member.captures(message) {
            Some(c) => {
                let kind = match &c[1] {
                    "Instance of" => OwnerKind::Instance,
                    "Class" => OwnerKind::Class,
                    _ => OwnerKind::Module,
                };
                MessageParts {
                    symbol: Some(c[3].to_string()),
                    owner: Some((kind, c[2].to_string())),
                }
            }
            None => MessageParts::default(),
        },
        "E0611" => match p.no_name.captures(message) {
            Some(c) => MessageParts {
                symbol: Some(c[1].to_string()),
                owner: Some((OwnerKind::Module, c[2].to_string())),
            },
            None => MessageParts {
                symbol: first_quoted(),
                owner: None,
            },
        },
        "E0401" | "E0602" | "E1136" | "E0601" => MessageParts {
            symbol: first_quoted(),
            owner: None,
        },
        "E1120" | "E1121" | "E1123" | "E1124" | "E1111" => MessageParts {
            symbol: p
                .call_target
                .captures(message)
                .map(|c| c[1].to_string())
                .or_else(|| (code != "E1121" && code != "E1111").then(first_quoted).flatten()),
            owner: None,
        },
        "E1102" => MessageParts {
            symbol: p.not_callable.captures(message).map(|c| c[1].to_string()),
            owner: None,
        },
        "E1133" | "E1134" => MessageParts {
            symbol: p.non_iterable.captures(message).map(|c| c[1].to_string()),
            owner: None,
        },
        "E0211" | "E0213" => MessageParts {
            symbol: p.method.captures(message).map(|c| c[1].to_string()),
            owner: None,
        },
        _ => MessageParts::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub all_diagnostics: Vec<Diagnostic>,
    pub solution_diagnostics: Vec<Diagnostic>,
    pub dominant_category: Option<ErrorCategory>,
    pub clean: bool,
}

impl CheckReport {
    pub fn clean() -> Self {
        filter_to_solution(Vec::new(), LineSpan::new(1, 1))
    }

    /// Solution diagnostics, dominant category first, otherwise in
    /// checker order.
    pub fn ordered_solution_diagnostics(&self) -> Vec<&Diagnostic> {
        let mut out: Vec<&Diagnostic> = self.solution_diagnostics.iter().collect();
        out.sort_by_key(|d| Some(d.category) != self.dominant_category);
        out
    }
}

/// Most frequent category; ties go to the earlier of UNDEF, API, OBJECT,
/// OTHER (FUNC last).
pub fn dominant_category(diags: &[Diagnostic]) -> Option<ErrorCategory> {
    let mut best: Option<(usize, ErrorCategory)> = None;
    for cat in ErrorCategory::ALL {
        let n = diags.iter().filter(|d| d.category == cat).count();
        if n > 0 && best.map_or(true, |(m, _)| n > m) {
            best = Some((n, cat));
        }
    }
    best.map(|(_, c)| c)
}

/// Keeps diagnostics on lines inside `solution_span`.
pub fn filter_to_solution(diags: Vec<Diagnostic>, solution_span: LineSpan) -> CheckReport {
    let solution_diagnostics: Vec<Diagnostic> = diags
        .iter()
        .filter(|d| solution_span.contains_line(d.line))
        .cloned()
        .collect();
    let dominant_category = dominant_category(&solution_diagnostics);
    CheckReport {
        all_diagnostics: diags,
        clean: solution_diagnostics.is_empty(),
        solution_diagnostics,
        dominant_category,
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("external analyzer unavailable: {0}")]
    ToolUnavailable(String),
    #[error("could not read analyzer output: {0}")]
    ProtocolError(String),
    #[error("checker i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Something that produces diagnostics for a candidate version of a file.
pub trait Checker: Send + Sync {
    fn name(&self) -> &str;

    /// `text` is the full candidate contents of `file` (repository-relative).
    fn check(&self, file: &str, text: &str, db: &ProjectDatabase) -> Result<Vec<Diagnostic>, CheckError>;
}

/// External analyzer with fallback to the built-in checker when the
/// analyzer cannot be spawned.
pub struct FallbackChecker {
    pub primary: ExternalChecker,
    pub fallback: BuiltinChecker,
}

impl Checker for FallbackChecker {
    fn name(&self) -> &str {
        "external+builtin"
    }

    fn check(&self, file: &str, text: &str, db: &ProjectDatabase) -> Result<Vec<Diagnostic>, CheckError> {
        match self.primary.check(file, text, db) {
            Err(CheckError::ToolUnavailable(why)) => {
                tracing::warn!(%why, "external analyzer unavailable, using built-in checker");
                self.fallback.check(file, text, db)
            }
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(code: &str, line: u32) -> Diagnostic {
        Diagnostic::new(code, "m", "f.py", line, 0)
    }

    #[test]
    fn filter_keeps_lines_in_span() {
        let r = filter_to_solution(vec![d("E0602", 2), d("E0602", 10), d("E1121", 11)], LineSpan::new(9, 20));
        assert_eq!(r.solution_diagnostics.len(), 2);
        assert_eq!(r.all_diagnostics.len(), 3);
        assert!(!r.clean);
    }

    #[test]
    fn empty_report_is_clean() {
        let r = filter_to_solution(vec![], LineSpan::new(1, 5));
        assert!(r.clean);
        assert_eq!(r.dominant_category, None);
    }

    #[test]
    fn dominant_is_most_frequent_with_fixed_tiebreak() {
        let r = filter_to_solution(vec![d("E0602", 1), d("E0401", 1), d("E1121", 1)], LineSpan::new(1, 1));
        assert_eq!(r.dominant_category, Some(ErrorCategory::Undef));
        let tie = filter_to_solution(vec![d("E1102", 1), d("E1121", 1), d("E9999", 1)], LineSpan::new(1, 1));
        assert_eq!(tie.dominant_category, Some(ErrorCategory::Api));
        let ordered = filter_to_solution(vec![d("E1102", 1), d("E0602", 1), d("E0401", 1)], LineSpan::new(1, 1));
        let codes: Vec<_> = ordered.ordered_solution_diagnostics().iter().map(|d| d.code.as_str()).collect();
        assert_eq!(codes, vec!["E0602", "E0401", "E1102"]);
    }

    #[test]
    fn repairability() {
        assert!(is_repairable(&d("E0611", 1)));
        assert!(is_repairable(&d("E9999", 1)));
        assert_eq!(d("E9999", 1).category, ErrorCategory::Other);
        assert!(!is_repairable(&Diagnostic::functional("test failed", "f.py", 1)));
    }

    #[test]
    fn messages_yield_symbols() {
        let cases = [
            ("E0401", "Unable to import 'keys'", Some("keys")),
            ("E0602", "Undefined variable 'undefined_x'", Some("undefined_x")),
            ("E1101", "Instance of 'RootLogger' has no 'loggerDict' member", Some("loggerDict")),
            ("E0611", "No name 'AsyncBolt5x0' in module 'neo4j._sync.io._bolt5'", Some("AsyncBolt5x0")),
            ("E1120", "No value for argument 'xmls' in function call 'dumpXML'", Some("dumpXML")),
            ("E1120", "No value for argument 'x' in function call", Some("x")),
            ("E1121", "Too many positional arguments for function call", None),
            ("E1123", "Unexpected keyword argument 'y' in function call", Some("y")),
            ("E1102", "'handler' is not callable", Some("handler")),
            ("E1102", "1 is not callable", None),
            ("E1133", "Non-iterable value count is used in an iterating context", Some("count")),
            ("E1136", "Value 'count' is unsubscriptable", Some("count")),
            ("E0211", "Method 'f' has no argument", Some("f")),
            ("E0001", "Parsing failed: 'invalid syntax (s, line 1)'", None),
        ];
        for (code, msg, want) in cases {
            assert_eq!(parse_message(code, msg).symbol.as_deref(), want, "{code} {msg}");
        }
        assert_eq!(
            parse_message("E1101", "Class 'RootLogger' has no 'zz' member").owner,
            Some((OwnerKind::Class, "RootLogger".into()))
        );
        assert_eq!(
            parse_message("E0611", "No name 'SyncBolt3' found in module 'async._bolt3'").owner,
            Some((OwnerKind::Module, "async._bolt3".into()))
        );
    }

    #[test]
    fn serde_uses_taxonomy_tags() {
        let json = serde_json::to_string(&d("E0611", 3)).unwrap();
        assert!(json.contains("\"category\":\"UNDEF\""));
        assert!(json.contains("\"subtype\":\"UNDEF-API\""));
        let back: Diagnostic = serde_json::from_str(&json).unwrap();
        assert!(back.is_consistent());
    }
}
