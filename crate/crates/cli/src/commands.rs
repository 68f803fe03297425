use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{EmbedderChoice, RunConfig};
use crate::{CheckArgs, Cli, Command, EvalArgs, IndexArgs, QueryArgs, RepairArgs};
use repofix_core::diagnostics::{filter_to_solution, BuiltinChecker, Checker, Diagnostic, ErrorCategory, ExternalChecker, FallbackChecker};
use repofix_core::eval::{build_report, load_references, load_results_dir, CandidateResult, TaskResult, TRACE_SUFFIX};
use repofix_core::index::{build_database, scan_source_files, ProjectDatabase, SourceFilter};
use repofix_core::llm::{
    AuditedBackend, BackendError, CompletionBackend, CompletionRequest, MockBackend, RemoteBackend,
};
use repofix_core::query::{execute_query_with, hardcoded_query_for, parse_query, synthesize_query, SynthesisError};
use repofix_core::refine::{
    insert_code, repair, run_task_tests, CheckerChoice, GenerationTask, IterationTrace, LoopConfig, RepairContext,
    RepairOutcome, TestOutcome,
};
use repofix_core::semantic::{Encoder, EmbedderKind, LocalEncoder, RemoteEncoder, DEFAULT_LOCAL_DIM, DEFAULT_LOCAL_SEED};
use repofix_core::span::LineSpan;

const REMOTE_DEFAULT_DIM: usize = 1536;

/// Bad flags, bad configuration, or missing credentials (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli, config: &RunConfig) -> Result<ExitCode> {
    let (code, summary) = match &cli.command {
        Command::Index(a) => index(a, config)?,
        Command::Check(a) => check(a, config)?,
        Command::Query(a) => query(a, config)?,
        Command::Repair(a) => repair_cmd(a, config)?,
        Command::Eval(a) => eval(a)?,
    };
    let text = serde_json::to_string(&summary)?;
    match &cli.summary {
        Some(p) => write_file(p, &(text + "\n"))?,
        None => eprintln!("summary: {text}"),
    }
    Ok(code)
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_db(path: &Path) -> Result<ProjectDatabase> {
    ProjectDatabase::load(path).with_context(|| format!("loading database {}", path.display()))
}

fn index(a: &IndexArgs, config: &RunConfig) -> Result<(ExitCode, Value)> {
    let out = a
        .out
        .clone()
        .or_else(|| config.paths.database.clone())
        .ok_or_else(|| usage("index needs --out <db.json>"))?;
    let embedder = a.embedder.unwrap_or(config.embedder);
    let encoder: Box<dyn Encoder> = match embedder {
        EmbedderChoice::Local => Box::new(LocalEncoder::new(a.dim.unwrap_or(DEFAULT_LOCAL_DIM), DEFAULT_LOCAL_SEED)),
        EmbedderChoice::Remote => Box::new(
            RemoteEncoder::from_env(a.dim.unwrap_or(REMOTE_DEFAULT_DIM)).map_err(|e| usage(e.to_string()))?,
        ),
    };
    let filter = SourceFilter {
        extensions: a
            .extensions
            .iter()
            .map(|e| if e.starts_with('.') { e.clone() } else { format!(".{e}") })
            .collect(),
        ..SourceFilter::default()
    };
    let root = a
        .project
        .canonicalize()
        .with_context(|| format!("project directory {}", a.project.display()))?;
    let scan = scan_source_files(&root, &filter)?;
    let files = scan.units.len();
    let db = build_database(root.display().to_string(), &scan.units, encoder.as_ref()).with_warnings(scan.warnings);
    db.save(&out)?;
    for w in db.warnings() {
        tracing::warn!(path = %w.path, "{}", w.message);
    }
    emit(&format!("indexed {files} files, {} entries -> {}\n", db.len(), out.display()))?;
    Ok((
        ExitCode::SUCCESS,
        json!({
            "command": "index",
            "project_root": root,
            "database": out,
            "files": files,
            "entries": db.len(),
            "table_rows": db.tables().row_count(),
            "embedder": db.embedder(),
            "warnings": db.warnings().len(),
        }),
    ))
}

fn make_checker(choice: CheckerChoice) -> Box<dyn Checker> {
    match choice {
        CheckerChoice::Builtin => Box::new(BuiltinChecker),
        CheckerChoice::External => Box::new(FallbackChecker {
            primary: ExternalChecker::from_env(),
            fallback: BuiltinChecker,
        }),
    }
}

fn parse_span(s: &str) -> Result<LineSpan> {
    let (a, b) = s.split_once('-').ok_or_else(|| usage(format!("span '{s}' is not START-END")))?;
    let span = LineSpan::new(
        a.trim().parse().map_err(|_| usage(format!("bad span start in '{s}'")))?,
        b.trim().parse().map_err(|_| usage(format!("bad span end in '{s}'")))?,
    );
    if !span.is_valid() {
        return Err(usage(format!("span '{s}' is empty or starts at 0")));
    }
    Ok(span)
}

fn file_text(db: &ProjectDatabase, file: &str) -> Result<String> {
    if let Some(t) = db.source(file) {
        return Ok(t.to_string());
    }
    let p = Path::new(db.project_root()).join(file);
    std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
}

fn check(a: &CheckArgs, config: &RunConfig) -> Result<(ExitCode, Value)> {
    let db = load_db(&a.db)?;
    let text = match &a.candidate {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => file_text(&db, &a.file)?,
    };
    let span = match &a.span {
        Some(s) => parse_span(s)?,
        None => LineSpan::new(1, text.lines().count().max(1) as u32),
    };
    let choice = a.checker.map(CheckerChoice::from).unwrap_or(config.loop_config.checker);
    let checker = make_checker(choice);
    let diags = checker.check(&a.file, &text, &db)?;
    let report = filter_to_solution(diags, span);
    emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
    let code = if report.clean { ExitCode::SUCCESS } else { ExitCode::from(1) };
    Ok((
        code,
        json!({
            "command": "check",
            "file": a.file,
            "span": span,
            "checker": checker.name(),
            "diagnostics": report.solution_diagnostics.len(),
            "clean": report.clean,
        }),
    ))
}

/// Completion backends selectable from the command line.
enum Backend {
    Mock(MockBackend),
    Remote(RemoteBackend),
}

impl Backend {
    fn warnings(&self) -> Vec<String> {
        match self {
            Backend::Mock(m) => m.warnings(),
            Backend::Remote(_) => Vec::new(),
        }
    }
}

impl CompletionBackend for Backend {
    fn complete(&self, req: &CompletionRequest<'_>) -> std::result::Result<Vec<String>, BackendError> {
        match self {
            Backend::Mock(m) => m.complete(req),
            Backend::Remote(r) => r.complete(req),
        }
    }

    fn name(&self) -> &str {
        match self {
            Backend::Mock(m) => m.name(),
            Backend::Remote(r) => r.name(),
        }
    }
}

fn make_backend(spec: &str) -> Result<Backend> {
    if spec == "remote" {
        return RemoteBackend::from_env().map(Backend::Remote).map_err(|e| usage(e.to_string()));
    }
    if let Some(path) = spec.strip_prefix("mock:") {
        let m = MockBackend::load(Path::new(path)).map_err(|e| usage(e.to_string()))?;
        return Ok(Backend::Mock(m));
    }
    Err(usage(format!("unknown backend '{spec}' (expected remote or mock:<transcript.json>)")))
}

#[derive(Deserialize)]
struct DiagnosticInput {
    code: String,
    message: String,
    file: String,
    line: u32,
    #[serde(default)]
    column: u32,
    #[serde(default)]
    symbol: Option<String>,
}

fn read_diagnostic(path: &Path) -> Result<Diagnostic> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let d: DiagnosticInput = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let diag = Diagnostic::new(d.code, d.message, d.file, d.line, d.column);
    Ok(match d.symbol {
        Some(s) => diag.with_symbol(Some(s)),
        None => diag,
    })
}

fn query(a: &QueryArgs, config: &RunConfig) -> Result<(ExitCode, Value)> {
    let db = load_db(&a.db)?;
    let (source, text, result) = if let Some(text) = &a.text {
        let q = parse_query(text).map_err(|e| usage(e.to_string()))?;
        ("text", q.to_string(), execute_query_with(&q, &db, a.max_lines))
    } else {
        let diag = read_diagnostic(a.for_error.as_deref().expect("clap enforces one source"))?;
        match hardcoded_query_for(&diag, &db) {
            Some(r) => ("hardcoded", format!("hardcoded:{}", diag.code), r),
            None => {
                let spec = a
                    .backend
                    .clone()
                    .or_else(|| config.backend.clone())
                    .ok_or_else(|| usage(format!("{} has no table lookup; query synthesis needs --backend", diag.code)))?;
                let backend = make_backend(&spec)?;
                match synthesize_query(&diag, &backend, "query", &config.generation) {
                    Ok(q) => ("synthesized", q.to_string(), execute_query_with(&q, &db, a.max_lines)),
                    Err(SynthesisError::QueryRejected { error, completion }) => {
                        eprintln!("query rejected: {error}\ncompletion: {completion}");
                        return Ok((
                            ExitCode::from(1),
                            json!({"command": "query", "source": "synthesized", "rejected": error.to_string()}),
                        ));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    };
    emit(&(serde_json::to_string_pretty(&json!({"query": text, "source": source, "result": result}))? + "\n"))?;
    Ok((
        ExitCode::SUCCESS,
        json!({"command": "query", "source": source, "query": text, "tuples": result.len()}),
    ))
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

struct TaskRun {
    task: GenerationTask,
    outcome: RepairOutcome,
    error: Option<String>,
    result: TaskResult,
}

fn candidate_results(
    task: &GenerationTask,
    outcome: &RepairOutcome,
    db: &ProjectDatabase,
    run_tests: bool,
    timeout: Duration,
) -> Result<Vec<CandidateResult>> {
    let original = if run_tests && task.test_command.is_some() {
        Some(file_text(db, &task.target_file)?)
    } else {
        None
    };
    let mut out = Vec::new();
    for c in &outcome.candidates {
        let mut final_category = c.report.dominant_category;
        let tests_passed = match &original {
            Some(orig) if !c.code.is_empty() => {
                let (text, _) = insert_code(orig, task.insertion_span, &c.code);
                match run_task_tests(task, &text, db, timeout)? {
                    Some(TestOutcome::Pass) => Some(true),
                    Some(TestOutcome::Fail(d)) => {
                        tracing::info!(task = %task.id, candidate = c.index, "{}", d.message);
                        final_category.get_or_insert(ErrorCategory::Func);
                        Some(false)
                    }
                    None => None,
                }
            }
            Some(_) => Some(false),
            None => None,
        };
        out.push(CandidateResult {
            index: c.index,
            iterations: c.iteration,
            status: c.status,
            final_category,
            tests_passed,
            code: c.code.clone(),
        });
    }
    Ok(out)
}

fn run_tasks<F>(tasks: Vec<GenerationTask>, jobs: usize, f: F) -> Result<Vec<TaskRun>>
where
    F: Fn(GenerationTask) -> Result<TaskRun> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
        pool.install(|| tasks.into_par_iter().map(&f).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        tasks.into_iter().map(f).collect()
    }
}

fn repair_cmd(a: &RepairArgs, config: &RunConfig) -> Result<(ExitCode, Value)> {
    let db_path = a
        .db
        .clone()
        .or_else(|| config.paths.database.clone())
        .ok_or_else(|| usage("repair needs --db <db.json>"))?;
    let task_paths: Vec<PathBuf> = if a.tasks.is_empty() { config.paths.tasks.clone() } else { a.tasks.clone() };
    if task_paths.is_empty() {
        return Err(usage("repair needs at least one --task <task.json>"));
    }
    let backend_spec = a
        .backend
        .clone()
        .or_else(|| config.backend.clone())
        .ok_or_else(|| usage("repair needs --backend remote|mock:<transcript.json>"))?;
    let out_dir = a
        .out
        .clone()
        .or_else(|| config.paths.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("repofix-out"));
    let jobs = a.jobs.or(config.jobs).unwrap_or(1);

    let mut generation = config.generation.clone();
    if let Some(t) = a.temperature {
        generation.temperature = t;
    }
    if let Some(k) = a.top_k {
        generation.top_k = Some(k);
    }
    if let Some(m) = a.max_new_tokens {
        generation.max_new_tokens = m;
    }
    if let Some(b) = a.prompt_budget {
        generation.prompt_char_budget = b;
    }
    generation.validate().map_err(|e| usage(e.to_string()))?;
    let mut loop_config: LoopConfig = config.loop_config.clone();
    if let Some(m) = a.max_iters {
        loop_config.max_iterations = m;
    }
    if let Some(n) = a.n {
        loop_config.n_candidates = n;
    }
    if let Some(r) = a.retrieval_n {
        loop_config.retrieval_n = r;
    }
    if let Some(c) = a.checker {
        loop_config.checker = c.into();
    }
    loop_config.validate().map_err(|e| usage(e.to_string()))?;

    // credentials and inputs are resolved before any work starts
    let backend = AuditedBackend::new(make_backend(&backend_spec)?);
    let db = load_db(&db_path)?;
    let encoder: Box<dyn Encoder> = match db.embedder().kind {
        EmbedderKind::Local => Box::new(LocalEncoder::from_info(db.embedder())),
        EmbedderKind::Remote => Box::new(RemoteEncoder::from_env(db.embedder().dim).map_err(|e| usage(e.to_string()))?),
    };
    let mut tasks = Vec::new();
    for p in &task_paths {
        tasks.push(GenerationTask::load(p).map_err(|e| usage(e.to_string()))?);
    }
    let mut ids = std::collections::HashSet::new();
    for t in &tasks {
        if !ids.insert(t.id.clone()) {
            return Err(usage(format!("duplicate task id '{}'", t.id)));
        }
    }
    let checker = make_checker(loop_config.checker);
    let ctx = RepairContext {
        db: &db,
        backend: &backend,
        encoder: encoder.as_ref(),
        checker: checker.as_ref(),
        generation: &generation,
    };
    let timeout = Duration::from_secs(a.test_timeout);

    let runs = run_tasks(tasks, jobs, |task| {
        let (outcome, error) = match repair(&task, &ctx, &loop_config) {
            Ok(o) => (o, None),
            Err(f) => (f.partial, Some(f.error.to_string())),
        };
        let candidates = candidate_results(&task, &outcome, &db, !a.no_tests, timeout)?;
        let result = TaskResult::from_candidates(task.id.clone(), candidates);
        Ok(TaskRun {
            task,
            outcome,
            error,
            result,
        })
    })?;

    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut results = Vec::new();
    let mut task_summaries = Vec::new();
    let mut failed = false;
    for run in &runs {
        let stem = safe_name(&run.task.id);
        write_file(&out_dir.join(format!("{stem}{TRACE_SUFFIX}")), &traces_jsonl(&run.outcome.traces)?)?;
        write_file(
            &out_dir.join(format!("{stem}.candidates.json")),
            &(serde_json::to_string_pretty(&run.outcome.candidates)? + "\n"),
        )?;
        let clean = run
            .outcome
            .candidates
            .iter()
            .filter(|c| c.status == repofix_core::CandidateStatus::Clean)
            .count();
        if run.error.is_some() || run.result.c == 0 {
            failed = true;
        }
        task_summaries.push(json!({
            "id": run.task.id,
            "n": run.result.n,
            "c": run.result.c,
            "clean": clean,
            "error": run.error,
        }));
        if let Some(e) = &run.error {
            eprintln!("task {}: {e}", run.task.id);
        }
        emit(&format!(
            "{}: {} candidates, {} clean, {} passing\n",
            run.task.id, run.result.n, clean, run.result.c
        ))?;
        results.push(run.result.clone());
    }
    write_file(&out_dir.join("results.json"), &(serde_json::to_string_pretty(&results)? + "\n"))?;
    let mut audit = backend.records();
    audit.sort_by(|x, y| x.task_id.cmp(&y.task_id));
    let mut audit_text = String::new();
    for r in &audit {
        audit_text.push_str(&serde_json::to_string(r)?);
        audit_text.push('\n');
    }
    write_file(&out_dir.join("audit.jsonl"), &audit_text)?;

    let summary = json!({
        "command": "repair",
        "database": db_path,
        "output_dir": out_dir,
        "backend": backend_spec,
        "checker": checker.name(),
        "jobs": jobs,
        "generation": generation,
        "loop": loop_config,
        "tasks": task_summaries,
        "backend_warnings": backend.inner().warnings(),
    });
    write_file(&out_dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok((if failed { ExitCode::from(1) } else { ExitCode::SUCCESS }, summary))
}

fn traces_jsonl(traces: &[IterationTrace]) -> Result<String> {
    let mut s = String::new();
    for t in traces {
        s.push_str(&serde_json::to_string(t)?);
        s.push('\n');
    }
    Ok(s)
}

fn eval(a: &EvalArgs) -> Result<(ExitCode, Value)> {
    if a.k.iter().any(|&k| k == 0) {
        bail!(UsageError("k values must be at least 1".into()));
    }
    let (results, traces) = load_results_dir(&a.results)?;
    let refs = match &a.refs {
        Some(dir) => load_references(dir)?,
        None => BTreeMap::new(),
    };
    let report = build_report(&results, &traces, &a.k, &refs)?;
    emit(&report.to_text())?;
    let json_path = a.json.clone().unwrap_or_else(|| a.results.join("report.json"));
    write_file(&json_path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if let Some(csv) = &a.csv {
        write_file(csv, &report.error_distribution.to_csv())?;
    }
    Ok((
        ExitCode::SUCCESS,
        json!({
            "command": "eval",
            "results": a.results,
            "report": json_path,
            "tasks": report.tasks,
            "pass_at_k": report.pass_at_k,
        }),
    ))
}
