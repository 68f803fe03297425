use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use rustpython_parser::lexer::lex;
use rustpython_parser::{Mode, Tok};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("pass@k needs c <= n (n={n}, c={c})")]
    CorrectExceedsSamples { n: u64, c: u64 },
    #[error("pass@k needs 1 <= k <= n (n={n}, k={k})")]
    InvalidK { n: u64, k: u64 },
}

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)` in product form.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricError> {
    if c > n {
        return Err(MetricError::CorrectExceedsSamples { n, c });
    }
    if k == 0 || k > n {
        return Err(MetricError::InvalidK { n, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0f64;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

/// Edit distance over Unicode scalar values, two-row table.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j]
            } else {
                1 + prev[j].min(prev[j + 1]).min(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev(a, b) / max(|a|, |b|)`; two empty strings score 1.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

fn strip_trailing(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    let mut out = lines.join("\n");
    out.truncate(out.trim_end_matches('\n').len());
    out
}

/// 1 when the texts agree once trailing whitespace is removed from every line.
pub fn exact_match(a: &str, b: &str) -> u8 {
    u8::from(strip_trailing(a) == strip_trailing(b))
}

const KEYWORDS: [&str; 35] = [
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

fn ident_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").unwrap())
}

/// Identifier tokens in source order. Uses the Python lexer, so names in
/// strings and comments are skipped; text the lexer rejects falls back to
/// a word regex minus keywords.
pub fn identifier_sequence(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    for tok in lex(code, Mode::Module) {
        match tok {
            Ok((Tok::Name { name }, _)) => out.push(name),
            Ok((Tok::Match, _)) => out.push("match".into()),
            Ok((Tok::Case, _)) => out.push("case".into()),
            Ok((Tok::Type, _)) => out.push("type".into()),
            Ok(_) => {}
            Err(_) => {
                return ident_re()
                    .find_iter(code)
                    .map(|m| m.as_str())
                    .filter(|w| !KEYWORDS.contains(w))
                    .map(str::to_string)
                    .collect();
            }
        }
    }
    out
}

pub fn identifiers(code: &str) -> BTreeSet<String> {
    identifier_sequence(code).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set-based identifier precision, recall and F1.
pub fn identifier_f1(pred: &str, gold: &str) -> F1Score {
    let p = identifiers(pred);
    let g = identifiers(gold);
    match (p.is_empty(), g.is_empty()) {
        (true, true) => {
            return F1Score {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            }
        }
        (true, false) | (false, true) => {
            return F1Score {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            }
        }
        _ => {}
    }
    let shared = p.intersection(&g).count() as f64;
    let precision = shared / p.len() as f64;
    let recall = shared / g.len() as f64;
    let f1 = if shared == 0.0 {
        0.0
    } else {
        2.0 / (1.0 / recall + 1.0 / precision)
    };
    F1Score { precision, recall, f1 }
}

/// 1 when both texts contain the same identifiers in the same order.
pub fn identifier_exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(identifier_sequence(pred) == identifier_sequence(gold))
}
