//! The generate, check, retrieve, regenerate loop.

mod feedback;
mod functional;
mod repair;
mod task;

pub use feedback::{assemble_feedback, insert_code, reindent, MAX_FEEDBACK_DIAGNOSTICS};
pub use functional::{run_task_tests, TestOutcome, DEFAULT_TEST_TIMEOUT};
pub use repair::{repair, RepairContext, RepairError, RepairFailure, RepairOutcome, EMPTY_COMPLETION_CODE};
pub use task::{
    Candidate, CandidateStatus, CheckerChoice, GenerationTask, IterationTrace, LoopConfig, LoopConfigError,
    StructuralTrace, TaskError,
};
