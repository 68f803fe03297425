use std::collections::HashSet;

use thiserror::Error;

use super::ast::{FromVar, Predicate, SelectItem, StructuralQuery};
use crate::index::EntryKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown predicate '{0}'")]
    UnknownPredicate(String),
    #[error("unknown entity kind '{0}'")]
    UnknownKind(String),
    #[error("undeclared variable '{0}'")]
    UndeclaredVariable(String),
    #[error("variable '{0}' declared twice")]
    DuplicateVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query error at offset {position}: {kind}")]
pub struct QueryParseError {
    /// Byte offset into the query text.
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Dot,
    Comma,
    LParen,
    RParen,
    Eq,
    Semi,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Str(s) => format!("string '{s}'"),
        Tok::Dot => "'.'".into(),
        Tok::Comma => "','".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Eq => "'='".into(),
        Tok::Semi => "';'".into(),
        Tok::End => "end of query".into(),
    }
}

fn syntax(position: usize, msg: impl Into<String>) -> QueryParseError {
    QueryParseError {
        position,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, QueryParseError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let single = match c {
            '.' => Some(Tok::Dot),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(t) = single {
            it.next();
            out.push((t, pos));
        } else if c == '\'' || c == '"' {
            it.next();
            let mut lit = String::new();
            let mut closed = false;
            while let Some((_, ch)) = it.next() {
                if ch == '\\' {
                    match it.next() {
                        Some((_, esc)) => lit.push(esc),
                        None => break,
                    }
                } else if ch == c {
                    closed = true;
                    break;
                } else {
                    lit.push(ch);
                }
            }
            if !closed {
                return Err(syntax(pos, "unterminated string literal"));
            }
            out.push((Tok::Str(lit), pos));
        } else if c.is_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(&(_, ch)) = it.peek() {
                if ch.is_alphanumeric() || ch == '_' {
                    ident.push(ch);
                    it.next();
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(ident), pos));
        } else {
            return Err(syntax(pos, format!("unexpected character '{c}'")));
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

const KEYWORDS: [&str; 5] = ["from", "where", "select", "and", "not"];

fn is_keyword(s: &str, kw: &str) -> bool {
    s.eq_ignore_ascii_case(kw)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    declared: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if is_keyword(s, kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryParseError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!("expected {}, found {}", kw.to_uppercase(), describe(self.peek())),
            ))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!("expected {}, found {}", describe(&tok), describe(self.peek())),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), QueryParseError> {
        match self.bump() {
            (Tok::Ident(s), pos) if !KEYWORDS.iter().any(|k| is_keyword(&s, k)) => Ok((s, pos)),
            (t, pos) => Err(syntax(pos, format!("expected identifier, found {}", describe(&t)))),
        }
    }

    fn variable(&mut self) -> Result<String, QueryParseError> {
        let (name, pos) = self.ident()?;
        if self.declared.contains(&name) {
            Ok(name)
        } else {
            Err(QueryParseError {
                position: pos,
                kind: ParseErrorKind::UndeclaredVariable(name),
            })
        }
    }

    fn declaration(&mut self) -> Result<FromVar, QueryParseError> {
        let (kind_name, kpos) = self.ident()?;
        let kind = ["Module", "Class", "Function", "Variable"]
            .iter()
            .find(|k| k.eq_ignore_ascii_case(&kind_name))
            .and_then(|k| EntryKind::parse(k))
            .ok_or(QueryParseError {
                position: kpos,
                kind: ParseErrorKind::UnknownKind(kind_name),
            })?;
        let (name, pos) = self.ident()?;
        if !self.declared.insert(name.clone()) {
            return Err(QueryParseError {
                position: pos,
                kind: ParseErrorKind::DuplicateVariable(name),
            });
        }
        Ok(FromVar { name, kind })
    }

    fn empty_call(&mut self) -> Result<(), QueryParseError> {
        self.expect(Tok::LParen)?;
        self.expect(Tok::RParen)
    }

    fn predicate(&mut self) -> Result<Predicate, QueryParseError> {
        if self.at_keyword("not") {
            self.bump();
            return Ok(Predicate::Not(Box::new(self.predicate()?)));
        }
        let var = self.variable()?;
        self.expect(Tok::Dot)?;
        let (method, mpos) = self.ident()?;
        match method.as_str() {
            "contains" => {
                self.expect(Tok::LParen)?;
                let other = self.variable()?;
                self.expect(Tok::RParen)?;
                Ok(Predicate::Contains(var, other))
            }
            "getName" => {
                if *self.peek() == Tok::LParen {
                    self.empty_call()?;
                }
                self.expect(Tok::Eq)?;
                match self.bump() {
                    (Tok::Str(lit), _) => Ok(Predicate::NameEquals(var, lit)),
                    (t, pos) => Err(syntax(pos, format!("expected string literal, found {}", describe(&t)))),
                }
            }
            "getScope" => {
                self.empty_call()?;
                self.expect(Tok::Eq)?;
                let other = self.variable()?;
                Ok(Predicate::ScopeEquals(var, other))
            }
            "inSource" => {
                self.empty_call()?;
                Ok(Predicate::InSource(var))
            }
            "isInitMethod" => {
                self.empty_call()?;
                Ok(Predicate::IsInitMethod(var))
            }
            _ => Err(QueryParseError {
                position: mpos,
                kind: ParseErrorKind::UnknownPredicate(method),
            }),
        }
    }

    fn select_item(&mut self) -> Result<SelectItem, QueryParseError> {
        let var = self.variable()?;
        if *self.peek() != Tok::Dot {
            return Ok(SelectItem { var, definition: false });
        }
        self.bump();
        let (method, mpos) = self.ident()?;
        if method != "getDefinition" {
            return Err(QueryParseError {
                position: mpos,
                kind: ParseErrorKind::UnknownPredicate(method),
            });
        }
        self.empty_call()?;
        Ok(SelectItem { var, definition: true })
    }

    fn query(&mut self) -> Result<StructuralQuery, QueryParseError> {
        let mut from = Vec::new();
        if !self.at_keyword("select") {
            self.expect_keyword("from")?;
            from.push(self.declaration()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                from.push(self.declaration()?);
            }
        }
        let mut predicates = Vec::new();
        if self.at_keyword("where") {
            self.bump();
            predicates.push(self.predicate()?);
            while self.at_keyword("and") {
                self.bump();
                predicates.push(self.predicate()?);
            }
        }
        self.expect_keyword("select")?;
        let mut select = vec![self.select_item()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            select.push(self.select_item()?);
        }
        if *self.peek() == Tok::Semi {
            self.bump();
        }
        if *self.peek() != Tok::End {
            return Err(syntax(
                self.offset(),
                format!("unexpected {} after SELECT clause", describe(self.peek())),
            ));
        }
        Ok(StructuralQuery {
            from,
            predicates,
            select,
        })
    }
}

/// Parses `FROM <Kind> v, ... [WHERE p and ...] SELECT v[.getDefinition()], ...`.
/// Keywords are case-insensitive; `getName` may omit its parentheses.
pub fn parse_query(text: &str) -> Result<StructuralQuery, QueryParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        declared: HashSet::new(),
    };
    p.query()
}
