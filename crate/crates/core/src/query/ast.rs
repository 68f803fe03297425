use std::fmt;

use serde::{Deserialize, Serialize};

use crate::index::EntryKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FromVar {
    pub name: String,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// `a.contains(b)`
    Contains(String, String),
    /// `v.getName() = 'literal'`
    NameEquals(String, String),
    /// `v.getScope() = w`
    ScopeEquals(String, String),
    InSource(String),
    IsInitMethod(String),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Predicate::Contains(a, b) | Predicate::ScopeEquals(a, b) => vec![a, b],
            Predicate::NameEquals(v, _) | Predicate::InSource(v) | Predicate::IsInitMethod(v) => vec![v],
            Predicate::Not(p) => p.variables(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectItem {
    pub var: String,
    /// Wrapped in `getDefinition()`.
    pub definition: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralQuery {
    pub from: Vec<FromVar>,
    pub predicates: Vec<Predicate>,
    pub select: Vec<SelectItem>,
}

impl StructuralQuery {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.from.iter().position(|v| v.name == name)
    }
}

pub(crate) fn quote(lit: &str) -> String {
    let mut out = String::with_capacity(lit.len() + 2);
    out.push('\'');
    for c in lit.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Contains(a, b) => write!(f, "{a}.contains({b})"),
            Predicate::NameEquals(v, lit) => write!(f, "{v}.getName() = {}", quote(lit)),
            Predicate::ScopeEquals(a, b) => write!(f, "{a}.getScope() = {b}"),
            Predicate::InSource(v) => write!(f, "{v}.inSource()"),
            Predicate::IsInitMethod(v) => write!(f, "{v}.isInitMethod()"),
            Predicate::Not(p) => write!(f, "not {p}"),
        }
    }
}

impl fmt::Display for StructuralQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FROM ")?;
        for (i, v) in self.from.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} {}", v.kind, v.name)?;
        }
        if !self.predicates.is_empty() {
            f.write_str(" WHERE ")?;
            for (i, p) in self.predicates.iter().enumerate() {
                if i > 0 {
                    f.write_str(" and ")?;
                }
                write!(f, "{p}")?;
            }
        }
        f.write_str(" SELECT ")?;
        for (i, s) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if s.definition {
                write!(f, "{}.getDefinition()", s.var)?;
            } else {
                f.write_str(&s.var)?;
            }
        }
        Ok(())
    }
}
