use serde::{Deserialize, Serialize};

use super::entry::{ContextEntry, EntryId, EntryKind};

/// The six precomputed relations over the entry parent graph.
///
/// Classes count as module-level (`M_C`) when every ancestor between them
/// and their module is a class; classes and functions nested inside
/// functions only live in the entry graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralTables {
    #[serde(rename = "M")]
    pub m: Vec<EntryId>,
    #[serde(rename = "M_C")]
    pub m_c: Vec<(EntryId, EntryId)>,
    #[serde(rename = "M_C_CF")]
    pub m_c_cf: Vec<(EntryId, EntryId, EntryId)>,
    #[serde(rename = "M_C_V")]
    pub m_c_v: Vec<(EntryId, EntryId, EntryId)>,
    #[serde(rename = "M_GF")]
    pub m_gf: Vec<(EntryId, EntryId)>,
    #[serde(rename = "M_GV")]
    pub m_gv: Vec<(EntryId, EntryId)>,
}

impl StructuralTables {
    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
            && self.m_c.is_empty()
            && self.m_c_cf.is_empty()
            && self.m_c_v.is_empty()
            && self.m_gf.is_empty()
            && self.m_gv.is_empty()
    }

    pub fn row_count(&self) -> usize {
        self.m.len() + self.m_c.len() + self.m_c_cf.len() + self.m_c_v.len() + self.m_gf.len() + self.m_gv.len()
    }

    /// Module of a table-visible class, if any.
    pub fn class_module(&self, class: EntryId) -> Option<EntryId> {
        self.m_c.iter().find(|(_, c)| *c == class).map(|(m, _)| *m)
    }
}

/// Module reached from `id` through class ancestors only.
fn class_chain_module(entries: &[ContextEntry], mut id: EntryId) -> Option<EntryId> {
    loop {
        let e = entries.get(id.index())?;
        match e.kind {
            EntryKind::Module => return Some(id),
            EntryKind::Class => id = e.parent?,
            _ => return None,
        }
    }
}

pub fn derive_tables(entries: &[ContextEntry]) -> StructuralTables {
    let mut t = StructuralTables::default();
    for e in entries {
        match e.kind {
            EntryKind::Module => t.m.push(e.id),
            EntryKind::Class => {
                if let Some(m) = e.parent.and_then(|p| class_chain_module(entries, p)) {
                    t.m_c.push((m, e.id));
                }
            }
            EntryKind::Function | EntryKind::Variable => {
                let Some(parent) = e.parent.and_then(|p| entries.get(p.index())) else {
                    continue;
                };
                let is_fn = e.kind == EntryKind::Function;
                match parent.kind {
                    EntryKind::Module if is_fn => t.m_gf.push((parent.id, e.id)),
                    EntryKind::Module => t.m_gv.push((parent.id, e.id)),
                    EntryKind::Class => {
                        let Some(m) = parent.parent.and_then(|p| class_chain_module(entries, p)) else {
                            continue;
                        };
                        if is_fn {
                            t.m_c_cf.push((m, parent.id, e.id));
                        } else {
                            t.m_c_v.push((m, parent.id, e.id));
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    t.m.sort();
    t.m_c.sort();
    t.m_c_cf.sort();
    t.m_c_v.sort();
    t.m_gf.sort();
    t.m_gv.sort();
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::LineSpan;

    fn entry(id: u32, kind: EntryKind, name: &str, parent: Option<u32>) -> ContextEntry {
        ContextEntry {
            id: EntryId(id),
            kind,
            name: name.into(),
            qualified_name: name.into(),
            file: "m.py".into(),
            docstring: None,
            signature: None,
            span: LineSpan::new(1, 1),
            parent: parent.map(EntryId),
            properties: Default::default(),
        }
    }

    #[test]
    fn one_module_class_method() {
        let entries = vec![
            entry(0, EntryKind::Module, "m", None),
            entry(1, EntryKind::Class, "C", Some(0)),
            entry(2, EntryKind::Function, "f", Some(1)),
        ];
        let t = derive_tables(&entries);
        assert_eq!(t.m, vec![EntryId(0)]);
        assert_eq!(t.m_c, vec![(EntryId(0), EntryId(1))]);
        assert_eq!(t.m_c_cf, vec![(EntryId(0), EntryId(1), EntryId(2))]);
        assert!(t.m_c_v.is_empty() && t.m_gf.is_empty() && t.m_gv.is_empty());
    }

    #[test]
    fn module_function_only() {
        let entries = vec![
            entry(0, EntryKind::Module, "m", None),
            entry(1, EntryKind::Function, "f", Some(0)),
        ];
        let t = derive_tables(&entries);
        assert_eq!(t.m_gf, vec![(EntryId(0), EntryId(1))]);
        assert!(t.m_c_cf.is_empty());
    }

    #[test]
    fn empty_entries() {
        assert!(derive_tables(&[]).is_empty());
    }

    #[test]
    fn function_local_classes_are_not_tabled() {
        let entries = vec![
            entry(0, EntryKind::Module, "m", None),
            entry(1, EntryKind::Function, "f", Some(0)),
            entry(2, EntryKind::Class, "Local", Some(1)),
            entry(3, EntryKind::Function, "g", Some(2)),
            entry(4, EntryKind::Class, "Outer", Some(0)),
            entry(5, EntryKind::Class, "Inner", Some(4)),
            entry(6, EntryKind::Variable, "v", Some(5)),
        ];
        let t = derive_tables(&entries);
        assert_eq!(t.m_c, vec![(EntryId(0), EntryId(4)), (EntryId(0), EntryId(5))]);
        assert!(t.m_c_cf.is_empty());
        assert_eq!(t.m_c_v, vec![(EntryId(0), EntryId(5), EntryId(6))]);
        assert_eq!(t.class_module(EntryId(5)), Some(EntryId(0)));
        assert_eq!(t.class_module(EntryId(2)), None);
    }
}
