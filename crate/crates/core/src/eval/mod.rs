//! Evaluation metrics and reports over repair runs.

mod metrics;
mod report;

pub use metrics::{
    edit_similarity, exact_match, identifier_exact_match, identifier_f1, identifier_sequence, identifiers,
    levenshtein, pass_at_k, F1Score, MetricError,
};
pub use report::{
    build_report, error_distribution, load_references, load_results_dir, match_metrics, CandidateResult,
    ErrorDistribution, EvalError, EvalReport, MatchMetrics, PassAtK, TaskResult, TRACE_SUFFIX,
};
