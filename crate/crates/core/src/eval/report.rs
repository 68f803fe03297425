use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{edit_similarity, exact_match, identifier_exact_match, identifier_f1, pass_at_k};
use crate::diagnostics::ErrorCategory;
use crate::refine::{CandidateStatus, IterationTrace};

/// File name suffix of per-task trace files.
pub const TRACE_SUFFIX: &str = ".trace.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub iterations: u32,
    pub status: CandidateStatus,
    /// Dominant category of the final check; `None` when clean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_category: Option<ErrorCategory>,
    /// Outcome of the task's test command, when it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tests_passed: Option<bool>,
    #[serde(default)]
    pub code: String,
}

impl CandidateResult {
    /// Passing means the tests passed, or the final check was clean for
    /// tasks without tests.
    pub fn passed(&self) -> bool {
        self.tests_passed.unwrap_or(self.status == CandidateStatus::Clean)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub n: u64,
    pub c: u64,
    #[serde(default)]
    pub candidates: Vec<CandidateResult>,
}

impl TaskResult {
    pub fn from_candidates(task_id: impl Into<String>, candidates: Vec<CandidateResult>) -> Self {
        Self {
            task_id: task_id.into(),
            n: candidates.len() as u64,
            c: candidates.iter().filter(|c| c.passed()).count() as u64,
            candidates,
        }
    }
}

/// Solution diagnostics per (category, iteration), summed over candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub iterations: Vec<u32>,
    /// `counts[category][i]` pairs with `iterations[i]`.
    pub counts: BTreeMap<ErrorCategory, Vec<u64>>,
}

impl ErrorDistribution {
    pub fn count(&self, category: ErrorCategory, iteration: u32) -> u64 {
        match self.iterations.iter().position(|&i| i == iteration) {
            Some(pos) => self.counts.get(&category).map_or(0, |v| v[pos]),
            None => 0,
        }
    }

    /// Static (non-FUNC) diagnostics still present after `iteration`.
    pub fn remaining(&self, iteration: u32) -> u64 {
        ErrorCategory::ALL
            .iter()
            .filter(|&&c| c != ErrorCategory::Func)
            .map(|&c| self.count(c, iteration))
            .sum()
    }

    /// Static diagnostics removed by each refinement iteration.
    pub fn fixed_per_iteration(&self) -> Vec<(u32, i64)> {
        self.iterations
            .windows(2)
            .map(|w| (w[1], self.remaining(w[0]) as i64 - self.remaining(w[1]) as i64))
            .collect()
    }

    /// `(category, iteration, count)` rows, zeros included.
    pub fn rows(&self) -> Vec<(ErrorCategory, u32, u64)> {
        let mut out = Vec::new();
        for cat in ErrorCategory::ALL {
            for &it in &self.iterations {
                out.push((cat, it, self.count(cat, it)));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("category,iteration,count\n");
        for (cat, it, n) in self.rows() {
            let _ = writeln!(s, "{},{it},{n}", cat.as_str());
        }
        s
    }
}

/// Counts `diagnostics_after` of every trace by category and iteration.
/// Iterations run from 0 to the largest seen; a run with no traces has an
/// empty table.
pub fn error_distribution(traces: &[IterationTrace]) -> ErrorDistribution {
    let Some(max) = traces.iter().map(|t| t.iteration).max() else {
        return ErrorDistribution::default();
    };
    let iterations: Vec<u32> = (0..=max).collect();
    let mut counts: BTreeMap<ErrorCategory, Vec<u64>> =
        ErrorCategory::ALL.iter().map(|&c| (c, vec![0; iterations.len()])).collect();
    for t in traces {
        for d in &t.diagnostics_after {
            counts.get_mut(&d.category).expect("all categories present")[t.iteration as usize] += 1;
        }
    }
    ErrorDistribution { iterations, counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchMetrics {
    pub tasks: usize,
    pub c_em: f64,
    pub c_es: f64,
    pub i_em: f64,
    pub i_f1: f64,
}

/// Mean match scores over `(prediction, reference)` pairs.
pub fn match_metrics(pairs: &[(String, String)]) -> Option<MatchMetrics> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&str, &str) -> f64| pairs.iter().map(|(p, g)| f(p, g)).sum::<f64>() / n;
    Some(MatchMetrics {
        tasks: pairs.len(),
        c_em: mean(&|p, g| f64::from(exact_match(p, g))),
        c_es: mean(&|p, g| edit_similarity(p, g)),
        i_em: mean(&|p, g| f64::from(identifier_exact_match(p, g))),
        i_f1: mean(&|p, g| identifier_f1(p, g).f1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: u64,
    pub value: f64,
    /// Tasks with at least k samples; the rest are left out of the mean.
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: usize,
    pub pass_at_k: Vec<PassAtK>,
    pub error_distribution: ErrorDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_metrics: Option<MatchMetrics>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Metric(#[from] super::metrics::MetricError),
}

pub fn build_report(
    results: &[TaskResult],
    traces: &[IterationTrace],
    ks: &[u64],
    references: &BTreeMap<String, String>,
) -> Result<EvalReport, EvalError> {
    let mut pass = Vec::new();
    for &k in ks {
        let mut sum = 0.0;
        let mut used = 0;
        for r in results.iter().filter(|r| r.n >= k) {
            sum += pass_at_k(r.n, r.c, k)?;
            used += 1;
        }
        pass.push(PassAtK {
            k,
            value: if used == 0 { 0.0 } else { sum / used as f64 },
            tasks: used,
        });
    }
    let pairs: Vec<(String, String)> = results
        .iter()
        .filter_map(|r| {
            let gold = references.get(&r.task_id)?;
            let pred = r.candidates.first().map_or("", |c| c.code.as_str());
            Some((pred.to_string(), gold.clone()))
        })
        .collect();
    Ok(EvalReport {
        tasks: results.len(),
        pass_at_k: pass,
        error_distribution: error_distribution(traces),
        match_metrics: match_metrics(&pairs),
    })
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tasks: {}", self.tasks);
        for p in &self.pass_at_k {
            let _ = writeln!(s, "pass@{:<3} {:.5}  ({} tasks)", p.k, p.value, p.tasks);
        }
        if let Some(m) = &self.match_metrics {
            let _ = writeln!(
                s,
                "C-EM {:.4}  C-ES {:.4}  I-EM {:.4}  I-F1 {:.4}  ({} tasks)",
                m.c_em, m.c_es, m.i_em, m.i_f1, m.tasks
            );
        }
        let d = &self.error_distribution;
        if !d.iterations.is_empty() {
            let _ = write!(s, "\n{:<8}", "category");
            for it in &d.iterations {
                let _ = write!(s, "{:>8}", format!("iter {it}"));
            }
            s.push('\n');
            for cat in ErrorCategory::ALL {
                let _ = write!(s, "{:<8}", cat.as_str());
                for &it in &d.iterations {
                    let _ = write!(s, "{:>8}", d.count(cat, it));
                }
                s.push('\n');
            }
        }
        s
    }
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads `results.json` (one task object or a list) and every
/// `*.trace.jsonl` file from a results directory.
pub fn load_results_dir(dir: &Path) -> Result<(Vec<TaskResult>, Vec<IterationTrace>), EvalError> {
    let results_path = dir.join("results.json");
    let text = read(&results_path)?;
    let fmt_err = |path: &Path, e: serde_json::Error| EvalError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| fmt_err(&results_path, e))?;
    let results: Vec<TaskResult> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    }
    .map_err(|e| fmt_err(&results_path, e))?;
    for r in &results {
        if r.c > r.n {
            return Err(EvalError::Format {
                path: results_path.display().to_string(),
                message: format!("task '{}' has c={} > n={}", r.task_id, r.c, r.n),
            });
        }
    }

    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| EvalError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(TRACE_SUFFIX)))
        .collect();
    files.sort();
    let mut traces = Vec::new();
    for f in files {
        for (no, line) in read(&f)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let t: IterationTrace = serde_json::from_str(line).map_err(|e| EvalError::Format {
                path: format!("{}:{}", f.display(), no + 1),
                message: e.to_string(),
            })?;
            traces.push(t);
        }
    }
    Ok((results, traces))
}

/// Gold code per task: `<task_id>.py` files in `dir`.
pub fn load_references(dir: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|source| EvalError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for e in entries.filter_map(Result::ok) {
        let p = e.path();
        if p.extension().is_some_and(|x| x == "py") {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), read(&p)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Diagnostic;

    fn trace(candidate: usize, iteration: u32, codes: &[&str]) -> IterationTrace {
        IterationTrace {
            task_id: "t".into(),
            candidate,
            iteration,
            prompt_digest: String::new(),
            structural: vec![],
            semantic: vec![],
            diagnostics_before: vec![],
            diagnostics_after: codes.iter().map(|c| Diagnostic::new(*c, "m", "f.py", 1, 0)).collect(),
            code_digest: String::new(),
        }
    }

    #[test]
    fn distribution_rows() {
        let traces = vec![
            trace(0, 0, &["E0602", "E0602"]),
            trace(1, 0, &["E0611"]),
            trace(0, 1, &["E0602"]),
            trace(1, 1, &[]),
        ];
        let d = error_distribution(&traces);
        assert_eq!(d.count(ErrorCategory::Undef, 0), 3);
        assert_eq!(d.count(ErrorCategory::Undef, 1), 1);
        assert_eq!(d.fixed_per_iteration(), vec![(1, 2)]);
        assert!(d.to_csv().contains("UNDEF,0,3\n"));
    }

    #[test]
    fn func_is_counted_but_not_a_repair() {
        let mut t0 = trace(0, 0, &[]);
        t0.diagnostics_after.push(Diagnostic::functional("boom", "f.py", 1));
        let d = error_distribution(&[t0, trace(0, 1, &[])]);
        assert_eq!(d.count(ErrorCategory::Func, 0), 1);
        assert_eq!(d.remaining(0), 0);
        assert_eq!(d.fixed_per_iteration(), vec![(1, 0)]);
    }

    #[test]
    fn clean_run_is_all_zero() {
        let d = error_distribution(&[trace(0, 0, &[])]);
        assert!(d.rows().iter().all(|r| r.2 == 0));
        assert_eq!(d.rows().len(), ErrorCategory::ALL.len());
    }

    #[test]
    fn report_pass_at_k() {
        let r = TaskResult {
            task_id: "t".into(),
            n: 20,
            c: 5,
            candidates: vec![],
        };
        let rep = build_report(&[r], &[], &[1, 5, 10], &BTreeMap::new()).unwrap();
        assert!((rep.pass_at_k[2].value - 0.98375).abs() < 1e-5);
        assert!(rep.to_text().contains("pass@10"));
    }
}
