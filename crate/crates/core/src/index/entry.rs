use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::span::LineSpan;

/// Dense index of an entry within its database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntryId(pub u32);

impl EntryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntryKind {
    Module,
    Class,
    Function,
    Variable,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Module => "Module",
            EntryKind::Class => "Class",
            EntryKind::Function => "Function",
            EntryKind::Variable => "Variable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Module" => Some(EntryKind::Module),
            "Class" => Some(EntryKind::Class),
            "Function" => Some(EntryKind::Function),
            "Variable" => Some(EntryKind::Variable),
            _ => None,
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Positional parameters of a function, with the count of trailing
/// defaulted ones. `*args` / `**kwargs` presence is kept so call-arity
/// checks can stay conservative.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Signature {
    pub params: Vec<String>,
    pub defaults: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vararg: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub kwarg: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kwonly: Vec<String>,
}

impl Signature {
    pub fn required(&self) -> usize {
        self.params.len().saturating_sub(self.defaults)
    }

    pub fn render(&self) -> String {
        let required = self.required();
        let mut parts: Vec<String> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i >= required {
                    format!("{p}=...")
                } else {
                    p.clone()
                }
            })
            .collect();
        if self.vararg {
            parts.push("*args".into());
        } else if !self.kwonly.is_empty() {
            parts.push("*".into());
        }
        parts.extend(self.kwonly.iter().cloned());
        if self.kwarg {
            parts.push("**kwargs".into());
        }
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub id: EntryId,
    pub kind: EntryKind,
    pub name: String,
    pub qualified_name: String,
    /// Repository-relative path of the defining file.
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub docstring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    pub span: LineSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<EntryId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, String>,
}

impl ContextEntry {
    pub fn property(&self, key: &str) -> Option<&str> {
        self.properties.get(key).map(String::as_str)
    }

    pub fn decorators(&self) -> impl Iterator<Item = &str> {
        self.property("decorators")
            .into_iter()
            .flat_map(|d| d.split(", "))
            .filter(|d| !d.is_empty())
    }
}

/// The passage embedded for an entry: kind, qualified name, signature and
/// (when present) docstring.
pub fn entry_schema_text(entry: &ContextEntry) -> String {
    let mut text = format!(
        "{} {}",
        entry.kind.as_str().to_lowercase(),
        entry.qualified_name
    );
    if let Some(sig) = &entry.signature {
        text.push_str(&sig.render());
    }
    if let Some(doc) = entry.docstring.as_deref().filter(|d| !d.is_empty()) {
        text.push('\n');
        text.push_str(doc);
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(name: &str, qn: &str, doc: Option<&str>) -> ContextEntry {
        ContextEntry {
            id: EntryId(0),
            kind: EntryKind::Function,
            name: name.into(),
            qualified_name: qn.into(),
            file: "bolt.py".into(),
            docstring: doc.map(Into::into),
            signature: Some(Signature {
                params: vec!["self".into(), "protocol_version".into()],
                defaults: 1,
                ..Default::default()
            }),
            span: LineSpan::new(1, 2),
            parent: None,
            properties: BTreeMap::new(),
        }
    }

    #[test]
    fn schema_text_contains_docstring_verbatim() {
        let e = entry(
            "get_handler",
            "bolt.AsyncBolt.get_handler",
            Some("Return Bolt protocol handlers"),
        );
        let text = entry_schema_text(&e);
        assert_eq!(
            text,
            "function bolt.AsyncBolt.get_handler(self, protocol_version=...)\nReturn Bolt protocol handlers"
        );
    }

    #[test]
    fn schema_text_omits_missing_docstring() {
        let text = entry_schema_text(&entry("f", "m.f", None));
        assert!(!text.contains('\n'));
    }

    #[test]
    fn same_simple_name_different_parent_differs() {
        let a = entry_schema_text(&entry("run", "m.A.run", None));
        let b = entry_schema_text(&entry("run", "m.B.run", None));
        assert_ne!(a, b);
    }

    #[test]
    fn signature_render_marks_varargs() {
        let s = Signature {
            params: vec!["a".into()],
            defaults: 0,
            vararg: true,
            kwarg: true,
            kwonly: vec!["k".into()],
        };
        assert_eq!(s.render(), "(a, *args, k, **kwargs)");
    }
}
