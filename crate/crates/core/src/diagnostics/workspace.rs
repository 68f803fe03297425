use std::io;
use std::path::{Component, Path};

use tempfile::TempDir;
use walkdir::WalkDir;

use crate::index::ProjectDatabase;

/// Writes a scratch copy of the project with `file` replaced by `text`.
///
/// The on-disk project root is copied first when it still exists (so data
/// files and tests are present), then every indexed source from the
/// database, then the candidate file.
pub fn materialize_project(db: &ProjectDatabase, file: &str, text: &str) -> io::Result<TempDir> {
    let dir = tempfile::Builder::new().prefix("repofix-").tempdir()?;
    let root = Path::new(db.project_root());
    if !db.project_root().is_empty() && root.is_dir() {
        for item in WalkDir::new(root).follow_links(false) {
            let Ok(item) = item else { continue };
            let rel = item.path().strip_prefix(root).unwrap_or(item.path());
            if rel.components().any(|c| c.as_os_str() == ".git") {
                continue;
            }
            if item.file_type().is_dir() {
                std::fs::create_dir_all(dir.path().join(rel))?;
            } else if item.file_type().is_file() {
                std::fs::copy(item.path(), dir.path().join(rel))?;
            }
        }
    }
    for (path, source) in db.sources() {
        write_relative(dir.path(), path, source)?;
    }
    write_relative(dir.path(), file, text)?;
    Ok(dir)
}

fn write_relative(root: &Path, rel: &str, text: &str) -> io::Result<()> {
    let rel_path = Path::new(rel);
    if rel_path
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("path {rel} escapes the project"),
        ));
    }
    let target = root.join(rel_path);
    if let Some(parent) = target.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(target, text)
}
