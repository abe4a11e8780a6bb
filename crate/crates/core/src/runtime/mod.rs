//! Candidate execution: the harness wire protocol, process supervision and
//! the evaluator backends used by the engine.

mod protocol;
mod supervisor;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

pub use protocol::{handle_line, parse_request, ErrorBody, ExecutionRequest, ExecutionResult};
pub use supervisor::{HarnessCommand, Supervisor};

use crate::problems::{evaluate_code, BatchLimits, Failure, FitnessReport, Instance, ProblemKind, Sense};

/// Maps a harness result to a fitness report: objectives pass through, every
/// error kind becomes a failure (aggregate fitness +inf).
pub fn classify_failure(result: &ExecutionResult, sense: Sense) -> FitnessReport {
    match (&result.objectives, &result.error) {
        (Some(obj), None) if result.ok => FitnessReport::ok(obj.clone(), sense),
        (_, Some(e)) => FitnessReport::failed(Failure::new(e.kind, e.message.clone()), sense),
        _ => FitnessReport::failed(Failure::new(crate::problems::FailureKind::ProtocolError, "inconsistent result"), sense),
    }
}

/// Scores candidate source on a fixed training set.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, code: &str, entry: &str) -> FitnessReport;
    fn sense(&self) -> Sense;
}

/// Runs candidates with the embedded interpreter.
pub struct InterpreterEvaluator {
    instances: Vec<Instance>,
    limits: BatchLimits,
}

impl InterpreterEvaluator {
    pub fn new(instances: Vec<Instance>, limits: BatchLimits) -> Self {
        InterpreterEvaluator { instances, limits }
    }
}

impl Evaluator for InterpreterEvaluator {
    fn evaluate(&self, code: &str, entry: &str) -> FitnessReport {
        evaluate_code(code, entry, &self.instances, self.limits)
    }

    fn sense(&self) -> Sense {
        self.instances.first().map_or(Sense::Minimize, |i| i.kind().sense())
    }
}

/// Runs candidates in supervised harness processes.
pub struct HarnessEvaluator {
    supervisor: Arc<Supervisor>,
    kind: ProblemKind,
    instances: Vec<Instance>,
    timeout: Duration,
}

impl HarnessEvaluator {
    pub fn new(supervisor: Arc<Supervisor>, kind: ProblemKind, instances: Vec<Instance>, timeout: Duration) -> Self {
        HarnessEvaluator { supervisor, kind, instances, timeout }
    }
}

impl Evaluator for HarnessEvaluator {
    fn evaluate(&self, code: &str, entry: &str) -> FitnessReport {
        let req = ExecutionRequest {
            id: self.supervisor.next_request_id(),
            code: code.to_string(),
            entry: entry.to_string(),
            problem: self.kind.tag().to_string(),
            instances: self.instances.clone(),
            timeout_ms: self.timeout.as_millis().max(1) as u64,
        };
        classify_failure(&self.supervisor.execute_batch(&req), self.kind.sense())
    }

    fn sense(&self) -> Sense {
        self.kind.sense()
    }
}

type ScoreFn = dyn Fn(&str, &str) -> FitnessReport + Send + Sync;

/// Evaluator backed by a closure; used for analytic objectives in tests and
/// scenario runs.
pub struct FnEvaluator {
    f: Box<ScoreFn>,
    sense: Sense,
}

impl FnEvaluator {
    pub fn new(sense: Sense, f: impl Fn(&str, &str) -> FitnessReport + Send + Sync + 'static) -> Self {
        FnEvaluator { f: Box::new(f), sense }
    }
}

impl Evaluator for FnEvaluator {
    fn evaluate(&self, code: &str, entry: &str) -> FitnessReport {
        (self.f)(code, entry)
    }

    fn sense(&self) -> Sense {
        self.sense
    }
}

/// The guest binary installed next to the running executable, if present.
pub fn default_harness_program() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?;
    [dir.join("ahd-guest"), dir.parent()?.join("ahd-guest")].into_iter().find(|p| p.is_file())
}
