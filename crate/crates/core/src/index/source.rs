use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

/// One source file of the project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    /// Repository-relative path with `/` separators.
    pub path: String,
    pub text: String,
    pub language_tag: String,
}

impl SourceUnit {
    pub fn python(path: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
            language_tag: "python".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SourceFilter {
    pub extensions: Vec<String>,
    pub language_tag: String,
}

impl Default for SourceFilter {
    fn default() -> Self {
        Self {
            extensions: vec![".py".into()],
            language_tag: "python".into(),
        }
    }
}

impl SourceFilter {
    fn matches(&self, path: &Path) -> bool {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        self.extensions.iter().any(|ext| {
            let ext = ext.trim_start_matches('.');
            name.len() > ext.len() + 1
                && name.ends_with(ext)
                && name.as_bytes()[name.len() - ext.len() - 1] == b'.'
        })
    }
}

#[derive(Debug, Default)]
pub struct SourceScan {
    pub units: Vec<SourceUnit>,
    pub warnings: Vec<IndexWarning>,
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read project root {path}: {source}")]
    Root {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Lists every file under `root` accepted by `filter`, in lexicographic
/// path order. Symlinked directories are not followed; unreadable or
/// non-UTF-8 files are skipped with a warning.
pub fn scan_source_files(root: &Path, filter: &SourceFilter) -> Result<SourceScan, ScanError> {
    std::fs::read_dir(root).map_err(|source| ScanError::Root {
        path: root.to_path_buf(),
        source,
    })?;
    let mut scan = SourceScan::default();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter();
    for item in walker {
        let item = match item {
            Ok(i) => i,
            Err(e) => {
                let path = e
                    .path()
                    .map(|p| relative(root, p))
                    .unwrap_or_default();
                scan.warnings.push(IndexWarning {
                    path,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if !item.file_type().is_file() || !filter.matches(item.path()) {
            continue;
        }
        let rel = relative(root, item.path());
        match std::fs::read(item.path()) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => scan.units.push(SourceUnit {
                    path: rel,
                    text,
                    language_tag: filter.language_tag.clone(),
                }),
                Err(_) => scan.warnings.push(IndexWarning {
                    path: rel,
                    message: "file is not valid UTF-8".into(),
                }),
            },
            Err(e) => scan.warnings.push(IndexWarning {
                path: rel,
                message: e.to_string(),
            }),
        }
    }
    // walkdir sorts per directory; a global sort makes "a.py" < "a/b.py" hold too
    scan.units.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(scan)
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths(scan: &SourceScan) -> Vec<&str> {
        scan.units.iter().map(|u| u.path.as_str()).collect()
    }

    #[test]
    fn empty_directory_scans_to_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
        assert!(scan.units.is_empty());
    }

    #[test]
    fn filters_and_orders_sources() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("a.py"), "x = 1\n").unwrap();
        std::fs::write(dir.path().join("sub/b.py"), "y = 2\n").unwrap();
        std::fs::write(dir.path().join("readme.md"), "# hi\n").unwrap();
        let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
        assert_eq!(paths(&scan), vec!["a.py", "sub/b.py"]);
        assert_eq!(scan.units[1].text, "y = 2\n");
    }

    #[test]
    fn non_source_only_directory_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        std::fs::write(dir.path().join("py"), "x").unwrap();
        let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
        assert!(scan.units.is_empty());
    }

    #[test]
    fn missing_root_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(scan_source_files(&dir.path().join("nope"), &SourceFilter::default()).is_err());
    }

    #[test]
    fn invalid_utf8_is_skipped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.py"), [0xff, 0xfe, 0x00]).unwrap();
        std::fs::write(dir.path().join("good.py"), "x = 1\n").unwrap();
        let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
        assert_eq!(paths(&scan), vec!["good.py"]);
        assert_eq!(scan.warnings.len(), 1);
        assert_eq!(scan.warnings[0].path, "bad.py");
    }

    #[cfg(unix)]
    #[test]
    fn symlinked_directories_are_not_followed() {
        let dir = tempfile::tempdir().unwrap();
        let outside = tempfile::tempdir().unwrap();
        std::fs::write(outside.path().join("z.py"), "z = 1\n").unwrap();
        std::os::unix::fs::symlink(outside.path(), dir.path().join("link")).unwrap();
        let scan = scan_source_files(dir.path(), &SourceFilter::default()).unwrap();
        assert!(scan.units.is_empty());
    }
}
