use crate::diagnostics::CheckReport;
use crate::span::LineSpan;

pub const MAX_FEEDBACK_DIAGNOSTICS: usize = 5;

/// One line per solution diagnostic, dominant category first, at most five:
/// `code message (line N): <source line>`. `None` for a clean report.
pub fn assemble_feedback(report: &CheckReport, file_text: &str) -> Option<String> {
    if report.clean {
        return None;
    }
    let lines: Vec<&str> = file_text.lines().collect();
    let out: Vec<String> = report
        .ordered_solution_diagnostics()
        .into_iter()
        .take(MAX_FEEDBACK_DIAGNOSTICS)
        .map(|d| {
            let src = lines
                .get((d.line as usize).saturating_sub(1))
                .map_or("", |l| l.trim());
            format!("{} {} (line {}): {}", d.code, d.message, d.line, src)
        })
        .collect();
    Some(out.join("\n"))
}

fn indent_of(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Strips the common indentation of `code` and re-indents it by `indent`.
pub fn reindent(code: &str, indent: &str) -> String {
    let common = code
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| indent_of(l).len())
        .min()
        .unwrap_or(0);
    code.lines()
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                format!("{indent}{}", &l[common..])
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Replaces the lines of `span` in `original` with `code`, indented like
/// the first non-blank line it replaces. Returns the new text and the
/// lines the code now occupies.
pub fn insert_code(original: &str, span: LineSpan, code: &str) -> (String, LineSpan) {
    let lines: Vec<&str> = original.lines().collect();
    let start = (span.start as usize).clamp(1, lines.len() + 1);
    let end = (span.end as usize).clamp(start - 1, lines.len());
    let indent = lines[start - 1..end]
        .iter()
        .find(|l| !l.trim().is_empty())
        .map_or("", |l| indent_of(l));
    let body = reindent(code, indent);
    let body_lines: Vec<&str> = if body.is_empty() { Vec::new() } else { body.lines().collect() };
    let mut out: Vec<&str> = Vec::with_capacity(lines.len() + body_lines.len());
    out.extend(&lines[..start - 1]);
    out.extend(&body_lines);
    out.extend(&lines[end..]);
    let mut text = out.join("\n");
    if original.ends_with('\n') || original.is_empty() {
        text.push('\n');
    }
    let last = (start + body_lines.len()).saturating_sub(1).max(start);
    (text, LineSpan::new(start as u32, last as u32))
}
