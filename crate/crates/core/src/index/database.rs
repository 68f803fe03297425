use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::entry::{entry_schema_text, ContextEntry, EntryId, EntryKind};
use super::extract::extract_entries;
use super::source::{IndexWarning, SourceUnit};
use super::tables::{derive_tables, StructuralTables};
use crate::par;
use crate::semantic::{EmbedderInfo, EmbeddingIndex, EmbeddingVector, Encoder, IndexError, IndexRow};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("database i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed database json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported database format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("inconsistent database: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// On-disk layout. Field order fixes the serialized byte layout.
#[derive(Serialize, Deserialize)]
struct DatabaseFile {
    format_version: u32,
    project_root: String,
    embedder: EmbedderInfo,
    entries: Vec<ContextEntry>,
    tables: StructuralTables,
    embeddings: Vec<Option<Vec<f32>>>,
    #[serde(default)]
    sources: BTreeMap<String, String>,
    #[serde(default)]
    warnings: Vec<IndexWarning>,
}

/// Indexed project: entries, the six structural tables, the embedding
/// index, and the source text of every indexed file. Immutable once built.
#[derive(Debug, Clone)]
pub struct ProjectDatabase {
    project_root: String,
    embedder: EmbedderInfo,
    entries: Vec<ContextEntry>,
    tables: StructuralTables,
    embeddings: Vec<Option<Vec<f32>>>,
    sources: BTreeMap<String, String>,
    warnings: Vec<IndexWarning>,
    index: EmbeddingIndex,
    children: Vec<Vec<EntryId>>,
    by_name: HashMap<String, Vec<EntryId>>,
    modules: HashMap<String, EntryId>,
}

/// Indexes `sources` (any order) and embeds every entry.
///
/// Files that fail to parse are skipped with a warning, as are entries the
/// encoder rejects (stored without an embedding).
pub fn build_database(project_root: impl Into<String>, sources: &[SourceUnit], encoder: &dyn Encoder) -> ProjectDatabase {
    let mut units: Vec<&SourceUnit> = sources.iter().collect();
    units.sort_by(|a, b| a.path.cmp(&b.path));
    let mut warnings = Vec::new();
    units.dedup_by(|b, a| {
        let dup = a.path == b.path;
        if dup {
            warnings.push(IndexWarning {
                path: b.path.clone(),
                message: "duplicate source path ignored".into(),
            });
        }
        dup
    });

    let per_file = par::map(&units, |u| extract_entries(u));
    let mut entries = Vec::new();
    let mut texts = BTreeMap::new();
    for (unit, result) in units.iter().zip(per_file) {
        match result {
            Ok(local) => {
                let offset = entries.len() as u32;
                entries.extend(local.into_iter().map(|mut e| {
                    e.id = EntryId(e.id.0 + offset);
                    e.parent = e.parent.map(|p| EntryId(p.0 + offset));
                    e
                }));
                texts.insert(unit.path.clone(), unit.text.clone());
            }
            Err(err) => warnings.push(IndexWarning {
                path: unit.path.clone(),
                message: format!("parse failure, file skipped: {err}"),
            }),
        }
    }

    let info = encoder.info();
    let passages: Vec<String> = entries.iter().map(entry_schema_text).collect();
    let mut embeddings = Vec::with_capacity(entries.len());
    for (entry, result) in entries.iter().zip(encoder.encode_batch(&passages)) {
        let vector = result.and_then(|v| {
            if v.dim() != info.dim {
                Err(crate::semantic::EncodeError::WrongDimension {
                    expected: info.dim,
                    got: v.dim(),
                })
            } else if !v.is_finite() {
                Err(crate::semantic::EncodeError::NonFinite)
            } else {
                Ok(v)
            }
        });
        match vector {
            Ok(v) => embeddings.push(Some(v.to_f32())),
            Err(err) => {
                warnings.push(IndexWarning {
                    path: entry.file.clone(),
                    message: format!("entry {} ({}) stored without embedding: {err}", entry.id, entry.qualified_name),
                });
                embeddings.push(None);
            }
        }
    }

    let tables = derive_tables(&entries);
    ProjectDatabase::assemble(project_root.into(), info, entries, tables, embeddings, texts, warnings)
        .expect("freshly built database is consistent")
}

impl ProjectDatabase {
    fn assemble(
        project_root: String,
        embedder: EmbedderInfo,
        entries: Vec<ContextEntry>,
        tables: StructuralTables,
        embeddings: Vec<Option<Vec<f32>>>,
        sources: BTreeMap<String, String>,
        warnings: Vec<IndexWarning>,
    ) -> Result<Self, DatabaseError> {
        validate_entries(&entries)?;
        if embeddings.len() != entries.len() {
            return Err(DatabaseError::Inconsistent(format!(
                "{} embeddings for {} entries",
                embeddings.len(),
                entries.len()
            )));
        }
        if derive_tables(&entries) != tables {
            return Err(DatabaseError::Inconsistent(
                "structural tables do not match the entry graph".into(),
            ));
        }
        let rows = entries
            .iter()
            .zip(&embeddings)
            .filter_map(|(e, v)| {
                v.as_ref().map(|v| IndexRow {
                    entry_id: e.id,
                    vector: EmbeddingVector::from_f32(v),
                    passage: entry_schema_text(e),
                })
            })
            .collect();
        let index = EmbeddingIndex::new(embedder.dim, rows)?;

        let mut children = vec![Vec::new(); entries.len()];
        let mut by_name: HashMap<String, Vec<EntryId>> = HashMap::new();
        let mut modules = HashMap::new();
        for e in &entries {
            if let Some(p) = e.parent {
                children[p.index()].push(e.id);
            }
            by_name.entry(e.name.clone()).or_default().push(e.id);
            if e.kind == EntryKind::Module {
                modules.insert(e.qualified_name.clone(), e.id);
            }
        }
        // packages answer to their name as well as to `pkg.__init__`
        for e in entries.iter().filter(|e| e.kind == EntryKind::Module) {
            if let Some(pkg) = e.qualified_name.strip_suffix(".__init__") {
                modules.entry(pkg.to_string()).or_insert(e.id);
            }
        }

        Ok(Self {
            project_root,
            embedder,
            entries,
            tables,
            embeddings,
            sources,
            warnings,
            index,
            children,
            by_name,
            modules,
        })
    }

    /// Adds warnings gathered before the build (e.g. from the file scan).
    pub fn with_warnings(mut self, mut extra: Vec<IndexWarning>) -> Self {
        extra.append(&mut self.warnings);
        self.warnings = extra;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.as_file()).expect("database serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DatabaseError> {
        let file: DatabaseFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(DatabaseError::Version(file.format_version));
        }
        Self::assemble(
            file.project_root,
            file.embedder,
            file.entries,
            file.tables,
            file.embeddings,
            file.sources,
            file.warnings,
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), DatabaseError> {
        std::fs::write(path, self.to_json()).map_err(|source| DatabaseError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DatabaseError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatabaseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn as_file(&self) -> DatabaseFileRef<'_> {
        DatabaseFileRef {
            format_version: FORMAT_VERSION,
            project_root: &self.project_root,
            embedder: &self.embedder,
            entries: &self.entries,
            tables: &self.tables,
            embeddings: &self.embeddings,
            sources: &self.sources,
            warnings: &self.warnings,
        }
    }

    pub fn project_root(&self) -> &str {
        &self.project_root
    }

    pub fn embedder(&self) -> &EmbedderInfo {
        &self.embedder
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: EntryId) -> Option<&ContextEntry> {
        self.entries.get(id.index())
    }

    pub fn tables(&self) -> &StructuralTables {
        &self.tables
    }

    pub fn index(&self) -> &EmbeddingIndex {
        &self.index
    }

    pub fn embedding(&self, id: EntryId) -> Option<&[f32]> {
        self.embeddings.get(id.index())?.as_deref()
    }

    pub fn sources(&self) -> &BTreeMap<String, String> {
        &self.sources
    }

    pub fn source(&self, path: &str) -> Option<&str> {
        self.sources.get(path).map(String::as_str)
    }

    pub fn warnings(&self) -> &[IndexWarning] {
        &self.warnings
    }

    pub fn children(&self, id: EntryId) -> &[EntryId] {
        self.children.get(id.index()).map_or(&[], Vec::as_slice)
    }

    /// Entries with the given simple name, in id order.
    pub fn by_name(&self, name: &str) -> &[EntryId] {
        self.by_name.get(name).map_or(&[], Vec::as_slice)
    }

    /// Module by dotted name; packages also match without `.__init__`.
    pub fn module(&self, qualified: &str) -> Option<EntryId> {
        self.modules.get(qualified).copied()
    }

    /// Dotted names of all modules, including the package aliases.
    pub fn module_names(&self) -> impl Iterator<Item = &str> {
        self.modules.keys().map(String::as_str)
    }

    /// Module entry that ultimately contains `id`.
    pub fn module_of(&self, id: EntryId) -> Option<EntryId> {
        let mut cur = self.entry(id)?;
        while let Some(p) = cur.parent {
            cur = self.entry(p)?;
        }
        (cur.kind == EntryKind::Module).then_some(cur.id)
    }

    /// True when `ancestor` is a strict ancestor of `id`.
    pub fn is_ancestor(&self, ancestor: EntryId, id: EntryId) -> bool {
        let mut cur = self.entry(id).and_then(|e| e.parent);
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.entry(p).and_then(|e| e.parent);
        }
        false
    }

    /// Source lines of an entry's span, when its file text is stored.
    pub fn definition_text(&self, id: EntryId) -> Option<String> {
        let e = self.entry(id)?;
        let text = self.source(&e.file)?;
        let lines: Vec<&str> = text
            .lines()
            .skip(e.span.start as usize - 1)
            .take(e.span.len() as usize)
            .collect();
        Some(lines.join("\n"))
    }

    /// Innermost entry of `file` whose span contains `line`
    /// (variables excluded).
    pub fn enclosing_entry(&self, file: &str, line: u32) -> Option<EntryId> {
        self.entries
            .iter()
            .filter(|e| e.file == file && e.kind != EntryKind::Variable && e.span.contains_line(line))
            .min_by_key(|e| (e.span.len(), std::cmp::Reverse(e.id)))
            .map(|e| e.id)
    }
}

#[derive(Serialize)]
struct DatabaseFileRef<'a> {
    format_version: u32,
    project_root: &'a str,
    embedder: &'a EmbedderInfo,
    entries: &'a [ContextEntry],
    tables: &'a StructuralTables,
    embeddings: &'a [Option<Vec<f32>>],
    sources: &'a BTreeMap<String, String>,
    warnings: &'a [IndexWarning],
}

fn validate_entries(entries: &[ContextEntry]) -> Result<(), DatabaseError> {
    for (i, e) in entries.iter().enumerate() {
        if e.id.index() != i {
            return Err(DatabaseError::Inconsistent(format!("entry at position {i} has id {}", e.id)));
        }
        if !e.span.is_valid() {
            return Err(DatabaseError::Inconsistent(format!("entry {} has invalid span {}", e.id, e.span)));
        }
        match (e.kind, e.parent) {
            (EntryKind::Module, None) => {}
            (EntryKind::Module, Some(_)) => {
                return Err(DatabaseError::Inconsistent(format!("module entry {} has a parent", e.id)));
            }
            (_, None) => {
                return Err(DatabaseError::Inconsistent(format!("entry {} has no parent", e.id)));
            }
            (_, Some(p)) if p.index() >= i => {
                return Err(DatabaseError::Inconsistent(format!(
                    "entry {} has parent {p} that does not precede it",
                    e.id
                )));
            }
            _ => {}
        }
    }
    Ok(())
}
