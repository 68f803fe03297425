//! Project context database: source scanning, explicit-stack syntax-tree
//! traversal into [`ContextEntry`] records, the six structural relation
//! tables, and the serialized [`ProjectDatabase`].

mod database;
mod entry;
mod extract;
mod source;
mod tables;

pub use database::{build_database, DatabaseError, ProjectDatabase, FORMAT_VERSION};
pub use entry::{entry_schema_text, ContextEntry, EntryId, EntryKind, Signature};
pub use extract::{extract_entries, module_name};
pub use source::{scan_source_files, IndexWarning, ScanError, SourceFilter, SourceScan, SourceUnit};
pub use tables::{derive_tables, StructuralTables};
