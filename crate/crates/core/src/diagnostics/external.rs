use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::Deserialize;
use wait_timeout::ChildExt;

use super::{workspace, CheckError, Checker, Diagnostic};
use crate::index::ProjectDatabase;

pub const DEFAULT_ANALYZER: &str = "pylint";

#[derive(Debug, Deserialize)]
struct AnalyzerMessage {
    #[serde(rename = "type")]
    kind: String,
    #[serde(rename = "message-id")]
    message_id: String,
    message: String,
    #[serde(default)]
    line: Option<u32>,
    #[serde(default)]
    column: Option<u32>,
    #[serde(default)]
    obj: Option<String>,
}

/// Parses the analyzer's JSON array, keeping error-severity findings only.
/// Diagnostics are attributed to `file`.
pub fn parse_analyzer_output(json: &str, file: &str) -> Result<Vec<Diagnostic>, CheckError> {
    let messages: Vec<AnalyzerMessage> =
        serde_json::from_str(json).map_err(|e| CheckError::ProtocolError(e.to_string()))?;
    Ok(messages
        .into_iter()
        .filter(|m| m.kind == "error")
        .map(|m| {
            let obj_name = m
                .obj
                .as_deref()
                .and_then(|o| o.rsplit('.').next())
                .filter(|o| !o.is_empty())
                .map(str::to_string);
            let d = Diagnostic::new(m.message_id, m.message, file, m.line.unwrap_or(1), m.column.unwrap_or(0));
            if d.symbol.is_none() && matches!(d.code.as_str(), "E0102" | "E0211" | "E0213") {
                d.with_symbol(obj_name)
            } else {
                d
            }
        })
        .collect())
}

/// Runs `<program> --output-format json <file>` inside `project_root`.
/// `file` is relative to the root.
pub fn run_external_checker(
    file: &str,
    project_root: &Path,
    program: &Path,
    timeout: Duration,
) -> Result<Vec<Diagnostic>, CheckError> {
    let mut child = Command::new(program)
        .arg("--output-format")
        .arg("json")
        .arg(file)
        .current_dir(project_root)
        .env("PYTHONPATH", project_root)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| CheckError::ToolUnavailable(format!("{}: {e}", program.display())))?;

    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let status = match child.wait_timeout(timeout)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(CheckError::ProtocolError(format!(
                "analyzer did not finish within {}s",
                timeout.as_secs()
            )));
        }
    };
    let out = out_reader.join().expect("stdout reader")?;
    let err = err_reader.join().unwrap_or_default();
    if out.trim().is_empty() {
        // exit status is informational, but silence plus failure means the
        // analyzer never ran on the file
        return if status.success() {
            Ok(Vec::new())
        } else {
            Err(CheckError::ProtocolError(format!(
                "analyzer exited with {status} and no output: {}",
                err.trim()
            )))
        };
    }
    parse_analyzer_output(&out, file)
}

/// Runs the external analyzer on a scratch copy of the project.
#[derive(Debug, Clone)]
pub struct ExternalChecker {
    pub program: PathBuf,
    pub timeout: Duration,
}

impl Default for ExternalChecker {
    fn default() -> Self {
        Self {
            program: PathBuf::from(DEFAULT_ANALYZER),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Overrides the analyzer executable.
pub const CHECKER_ENV: &str = "REPOFIX_CHECKER";

impl ExternalChecker {
    /// Default analyzer unless the environment names another.
    pub fn from_env() -> Self {
        match std::env::var_os(CHECKER_ENV) {
            Some(p) if !p.is_empty() => Self {
                program: PathBuf::from(p),
                ..Self::default()
            },
            _ => Self::default(),
        }
    }
}

impl Checker for ExternalChecker {
    fn name(&self) -> &str {
        "external"
    }

    fn check(&self, file: &str, text: &str, db: &ProjectDatabase) -> Result<Vec<Diagnostic>, CheckError> {
        let dir = workspace::materialize_project(db, file, text)?;
        run_external_checker(file, dir.path(), &self.program, self.timeout)
    }
}
