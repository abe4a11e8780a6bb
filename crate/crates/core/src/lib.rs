//! Island-model automated heuristic design.

pub mod ast_metric;
pub mod config;
pub mod engine;
pub mod guest;
pub mod llm;
pub mod problems;
pub mod runtime;
pub mod scheduler;
pub mod session;
pub mod strategy;
pub mod tuner;
