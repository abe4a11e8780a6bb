//! Embedded evaluator for candidate heuristics.
//!
//! Candidates are small Python modules. This module runs the subset they use
//! (functions, closures, comprehensions, lists/dicts/sets/tuples, `math`,
//! `heapq`) directly from the parsed syntax tree, without a Python process.
//! Execution is bounded by a deterministic step budget plus a wall-clock
//! deadline. Modules outside that subset (e.g. `numpy`) fail with an
//! execution error so the caller can route the candidate to the external
//! harness instead.

mod builtins;
mod interp;
mod value;

use std::fmt;
use std::time::{Duration, Instant};

use rustpython_parser::{ast, Parse};

pub use interp::Interpreter;
pub use value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuestErrorKind {
    Parse,
    Exec,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuestError {
    pub kind: GuestErrorKind,
    pub message: String,
}

impl GuestError {
    pub fn parse(message: impl Into<String>) -> Self {
        GuestError { kind: GuestErrorKind::Parse, message: message.into() }
    }

    pub fn exec(message: impl Into<String>) -> Self {
        GuestError { kind: GuestErrorKind::Exec, message: message.into() }
    }

    pub fn timeout(message: impl Into<String>) -> Self {
        GuestError { kind: GuestErrorKind::Timeout, message: message.into() }
    }

    fn is_catchable(&self) -> bool {
        self.kind == GuestErrorKind::Exec
    }
}

impl fmt::Display for GuestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            GuestErrorKind::Parse => "parse error",
            GuestErrorKind::Exec => "execution error",
            GuestErrorKind::Timeout => "timeout",
        };
        write!(f, "{kind}: {}", self.message)
    }
}

impl std::error::Error for GuestError {}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub step_limit: u64,
    pub deadline: Option<Instant>,
}

impl Limits {
    pub fn new(step_limit: u64, timeout: Option<Duration>) -> Self {
        Limits { step_limit, deadline: timeout.map(|t| Instant::now() + t) }
    }

    pub fn steps(step_limit: u64) -> Self {
        Limits { step_limit, deadline: None }
    }
}

/// A parsed candidate module, shareable across threads.
#[derive(Debug, Clone)]
pub struct GuestProgram {
    suite: Vec<ast::Stmt>,
}

impl GuestProgram {
    pub fn compile(source: &str) -> Result<Self, GuestError> {
        let suite = ast::Suite::parse(source, "<candidate>").map_err(|e| GuestError::parse(e.to_string()))?;
        Ok(GuestProgram { suite })
    }

    pub(crate) fn suite(&self) -> &[ast::Stmt] {
        &self.suite
    }

    /// Names of module-level function definitions, in source order.
    pub fn function_names(&self) -> Vec<String> {
        self.suite
            .iter()
            .filter_map(|s| match s {
                ast::Stmt::FunctionDef(f) => Some(f.name.to_string()),
                _ => None,
            })
            .collect()
    }
}
