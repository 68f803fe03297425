use std::io::Read;
use std::os::unix::process::CommandExt;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use super::task::GenerationTask;
use crate::diagnostics::{materialize_project, Diagnostic};
use crate::index::ProjectDatabase;

pub const DEFAULT_TEST_TIMEOUT: Duration = Duration::from_secs(60);
const OUTPUT_TAIL_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestOutcome {
    Pass,
    Fail(Diagnostic),
}

fn tail(text: &str) -> &str {
    let text = text.trim_end();
    match text.char_indices().rev().nth(OUTPUT_TAIL_CHARS) {
        Some((i, _)) => &text[i..],
        None => text,
    }
}

/// Runs `task.test_command` with `sh -c` inside a scratch copy of the
/// project holding `file_text` as the target file. A nonzero exit or a
/// timeout yields one FUNC diagnostic; `None` when the task has no command.
pub fn run_task_tests(
    task: &GenerationTask,
    file_text: &str,
    db: &ProjectDatabase,
    timeout: Duration,
) -> std::io::Result<Option<TestOutcome>> {
    let Some(command) = task.test_command.as_deref() else {
        return Ok(None);
    };
    let dir = materialize_project(db, &task.target_file, file_text)?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .current_dir(dir.path())
        .env("PYTHONPATH", dir.path())
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let status = child.wait_timeout(timeout)?;
    let line = task.insertion_span.start;
    let outcome = match status {
        None => {
            kill_group(child.id());
            let _ = child.wait();
            let d = Diagnostic::functional(
                format!("test command timed out after {} s", timeout.as_secs_f64()),
                task.target_file.as_str(),
                line,
            )
            .with_symbol(Some("timeout".into()));
            TestOutcome::Fail(d)
        }
        Some(s) if s.success() => TestOutcome::Pass,
        Some(s) => {
            let out = out_reader.join().unwrap_or_default();
            let err = err_reader.join().unwrap_or_default();
            let detail = if err.trim().is_empty() { out } else { err };
            let code = s.code().map_or_else(|| "signal".to_string(), |c| c.to_string());
            let d = Diagnostic::functional(
                format!("test command failed (exit {code}): {}", tail(&detail)),
                task.target_file.as_str(),
                line,
            );
            return Ok(Some(TestOutcome::Fail(d)));
        }
    };
    Ok(Some(outcome))
}

fn kill_group(pid: u32) {
    // SAFETY: signalling a process group we created; failure is harmless.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}
