//! Prompt templates for the five generation operators, insight extraction and
//! selective reset.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strategy::PromptStrategy;

pub const GENERATOR_SYSTEM_E1: &str = "You are an expert algorithm engineer. Design efficient heuristic functions. Output your algorithm description inside a brace, then implement it in Python.";
pub const GENERATOR_SYSTEM: &str = "You are an expert algorithm engineer. Design efficient heuristic functions. Output your algorithm description inside a brace, then implement in Python.";
pub const INSIGHT_INSTRUCTION: &str = "You are an expert in the domain of optimization heuristics. Identify the mechanisms responsible for the performance gap and explain why it is effective in two paragraphs.";

const GOAL: &str = "Goal: Design a novel heuristic algorithm.";
const E1_TASK: &str = "Create a new algorithm that has a totally different form from the given ones.";
const E2_TASK: &str = "Identify the common backbone idea in these algorithms, then create a new algorithm motivated from it but with a different form.";
const M1_TASK: &str = "Create a new algorithm that has a different form but can be a modified version of the provided one.";
const M2_TASK: &str = "Identify the main scoring components and create a new algorithm with different configurations or score function.";
const M3_TASK: &str = "Identify the main components in the function below. Analyze whether any components can be overfit to specific instances. Simplify or optimize the components to enhance generalization. Provide the different revised code, keeping the function name, inputs, and outputs unchanged.";

const PARAMS_CROSSOVER: &str = "List a moderate number of tunable parameters and their roles (avoid too many hardcoded values).";
const PARAMS_DEFAULT: &str = "List a moderate number of tunable parameters and their roles.";
const PARAMS_M2: &str = "List the key controllable factors and their roles (for downstream optimization).";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parent {
    pub thought: String,
    pub code: String,
    /// Native-sense objective.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub problem_desc: String,
    pub func_name: String,
    /// Generation operators: the parents. INSIGHT: `[best, worst]`.
    pub parents: Vec<Parent>,
    pub local_insight: Option<String>,
    pub neighbor_insight: Option<String>,
    /// RESET only.
    pub global_elite: Option<Parent>,
}

impl PromptContext {
    pub fn new(problem_desc: impl Into<String>, func_name: impl Into<String>) -> Self {
        PromptContext {
            problem_desc: problem_desc.into(),
            func_name: func_name.into(),
            parents: Vec::new(),
            local_insight: None,
            neighbor_insight: None,
            global_elite: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArityError {
    #[error("{strategy} expects {expected} parent(s), got {got}")]
    Parents { strategy: PromptStrategy, expected: &'static str, got: usize },
    #[error("RESET needs a global elite")]
    MissingElite,
}

fn fenced(code: &str) -> String {
    format!("```python\n{}\n```", code.trim_end())
}

/// Scores are printed in the problem's own sense with six decimals.
pub fn format_score(objective: f64) -> String {
    format!("{objective:.6}")
}

fn output_format(params_line: &str) -> String {
    format!(
        "You must strictly follow this output format:\n\
         - [Thought]: Summarize in exactly 2 sentences: the core idea.\n\
         - [KEY PARAMETERS]: {params_line}\n\
         - [Code]: Complete executable Python code in a code block. Include all imports."
    )
}

fn insight_block(insights: &[Option<&String>]) -> Option<String> {
    let present: Vec<&str> = insights.iter().flatten().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if present.is_empty() {
        return None;
    }
    Some(format!("Contextual Insight:\n{}", present.join("\n")))
}

fn header(ctx: &PromptContext) -> String {
    format!("Problem Description: {}\nFunction Signature: {}\n{GOAL}", ctx.problem_desc, ctx.func_name)
}

fn check_parents(strategy: PromptStrategy, ctx: &PromptContext) -> Result<(), ArityError> {
    let n = ctx.parents.len();
    let (ok, expected) = match strategy {
        PromptStrategy::E1 | PromptStrategy::E2 => (n >= 2, "at least 2"),
        PromptStrategy::M1 | PromptStrategy::M2 | PromptStrategy::M3 => (n == 1, "exactly 1"),
        PromptStrategy::Insight => (n == 2, "exactly 2 (best, worst)"),
        PromptStrategy::Reset => (true, "any"),
    };
    if ok {
        Ok(())
    } else {
        Err(ArityError::Parents { strategy, expected, got: n })
    }
}

/// Renders the system and user messages for `strategy`.
pub fn render_prompt(strategy: PromptStrategy, ctx: &PromptContext) -> Result<Vec<Message>, ArityError> {
    check_parents(strategy, ctx)?;
    let task = |sentence: &str| format!("Task: Implement as a function named {}_v2 with the same signature.\n{sentence}", ctx.func_name);
    let local = ctx.local_insight.as_ref();
    let neighbor = ctx.neighbor_insight.as_ref();
    let mut sections: Vec<String> = Vec::new();
    let system = match strategy {
        PromptStrategy::E1 | PromptStrategy::E2 => {
            sections.push(header(ctx));
            let mut parents = format!("I have {} existing algorithms:", ctx.parents.len());
            for (i, p) in ctx.parents.iter().enumerate() {
                parents.push_str(&format!("\nNo.{} algorithm:\n{}\nCode:\n{}", i + 1, p.thought.trim(), fenced(&p.code)));
            }
            sections.push(parents);
            sections.push(task(if strategy == PromptStrategy::E1 { E1_TASK } else { E2_TASK }));
            sections.push(output_format(PARAMS_CROSSOVER));
            sections.extend(insight_block(&[local, neighbor]));
            if strategy == PromptStrategy::E1 {
                GENERATOR_SYSTEM_E1
            } else {
                GENERATOR_SYSTEM
            }
        }
        PromptStrategy::M1 | PromptStrategy::M2 => {
            let p = &ctx.parents[0];
            sections.push(header(ctx));
            sections.push(format!("Current algorithm:\n{}\nCode:\n{}", p.thought.trim(), fenced(&p.code)));
            if strategy == PromptStrategy::M1 {
                sections.push(task(M1_TASK));
                sections.push(output_format(PARAMS_DEFAULT));
                sections.extend(insight_block(&[local, neighbor]));
            } else {
                sections.push(task(M2_TASK));
                sections.push(output_format(PARAMS_M2));
                sections.extend(insight_block(&[local]));
            }
            GENERATOR_SYSTEM
        }
        PromptStrategy::M3 => {
            let p = &ctx.parents[0];
            sections.push(header(ctx));
            sections.push(format!("Current algorithm Code:\n{}", fenced(&p.code)));
            sections.push(format!("Task: Implement as a function named {}_v2 with the same signature.", ctx.func_name));
            sections.push(M3_TASK.to_string());
            sections.push(output_format(PARAMS_DEFAULT));
            sections.extend(insight_block(&[local]));
            GENERATOR_SYSTEM
        }
        PromptStrategy::Insight => {
            let (best, worst) = (&ctx.parents[0], &ctx.parents[1]);
            sections.push(format!("High Performance (Score: {}):\n{}", format_score(best.objective), fenced(&best.code)));
            sections.push(format!("Low Performance (Score: {}):\n{}", format_score(worst.objective), fenced(&worst.code)));
            sections.push(format!("Instruction:\n{INSIGHT_INSTRUCTION}"));
            INSIGHT_INSTRUCTION
        }
        PromptStrategy::Reset => {
            let elite = ctx.global_elite.as_ref().ok_or(ArityError::MissingElite)?;
            sections.push(format!("Reference Elite (Score: {}):\n{}", format_score(elite.objective), fenced(&elite.code)));
            sections.push(format!(
                "Instruction:\nYou are an expert in the domain of optimization heuristics. Extract domain insights from the Elite solution provided above, then create a structurally novel and advanced algorithm. Output the design rationale followed by the implementation of {}_v2.",
                ctx.func_name
            ));
            sections.push(output_format(PARAMS_DEFAULT));
            GENERATOR_SYSTEM
        }
    };
    Ok(vec![Message::system(system), Message::user(sections.join("\n\n"))])
}
