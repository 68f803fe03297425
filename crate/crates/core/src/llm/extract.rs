use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("completion contained no code")]
    EmptyCompletion,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Drops leading blank lines and trailing whitespace. Leading indentation
/// of the first code line is kept.
fn tidy(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    let body: Vec<&str> = lines[start..].iter().map(|l| l.trim_end()).collect();
    body.join("\n").trim_end().to_string()
}

/// Code carried by a completion: the interior of the first fenced block,
/// or the whole response when it has no fence. Never contains fence lines.
pub fn extract_code(response: &str) -> Result<String, ExtractError> {
    let lines: Vec<&str> = response.lines().collect();
    let code = match lines.iter().position(|l| is_fence(l)) {
        Some(open) => {
            let rest = &lines[open + 1..];
            let close = rest.iter().position(|l| is_fence(l)).unwrap_or(rest.len());
            let mut interior = &rest[..close];
            // a doubled opening fence leaves the real block one level down
            if interior.iter().all(|l| l.trim().is_empty()) && close < rest.len() {
                let after = &rest[close + 1..];
                let end = after.iter().position(|l| is_fence(l)).unwrap_or(after.len());
                interior = &after[..end];
            }
            tidy(interior)
        }
        None => tidy(&lines),
    };
    if code.trim().is_empty() {
        Err(ExtractError::EmptyCompletion)
    } else {
        Ok(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block_interior() {
        assert_eq!(extract_code("```\ndef f():\n  pass\n```").unwrap(), "def f():\n  pass");
        assert_eq!(extract_code("Here:\n```python\nx = 1\n```\ntrailing").unwrap(), "x = 1");
    }

    #[test]
    fn bare_code_passes_through() {
        assert_eq!(extract_code("\n\ndef f():\n    return 1\n\n").unwrap(), "def f():\n    return 1");
        assert_eq!(extract_code("    return x  \n").unwrap(), "    return x");
    }

    #[test]
    fn first_of_two_blocks() {
        let r = "```\na = 1\n```\ntext\n```\nb = 2\n```\n";
        assert_eq!(extract_code(r).unwrap(), "a = 1");
    }

    #[test]
    fn doubled_fences() {
        assert_eq!(extract_code("```python\n```python\ny = 2\n```\n```").unwrap(), "y = 2");
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(extract_code("   \n"), Err(ExtractError::EmptyCompletion));
        assert_eq!(extract_code("```\n```"), Err(ExtractError::EmptyCompletion));
    }
}
