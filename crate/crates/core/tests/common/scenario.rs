//! Scripted language models and analytic fitness for engine scenarios.

use ahd_core::config::RunConfig;
use ahd_core::engine::{Individual, Origin, ProblemSetup};
use ahd_core::llm::{estimate_tokens, Completion, Gateway, LlmError, LlmRequest, Transport};
use ahd_core::problems::{Failure, FailureKind, FitnessReport, ProblemKind, Sense};
use ahd_core::runtime::FnEvaluator;
use ahd_core::tuner::identify_params;

type Script = dyn Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync;

pub struct Scripted(Box<Script>);

impl Transport for Scripted {
    fn complete(&self, req: &LlmRequest) -> Result<Completion, LlmError> {
        let text = (self.0)(req)?;
        let prompt: String = req.messages.iter().map(|m| m.content.as_str()).collect();
        Ok(Completion { prompt_tokens: estimate_tokens(&prompt), completion_tokens: estimate_tokens(&text), text })
    }
}

pub fn scripted(f: impl Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync + 'static) -> Gateway {
    Gateway::new(Box::new(Scripted(Box::new(f))), 1.0)
}

pub fn respond(code: &str, params: &str) -> String {
    format!("[Thought]: scripted.\n\n[KEY PARAMETERS]:\n{params}\n\n[Code]:\n```python\n{}\n```\n", code.trim_end())
}

/// `f` returns its constants; fitness is `1 + Σ (c - 3)²` over every
/// assigned constant, so 3.0 is optimal for each.
pub fn quadratic_problem() -> ProblemSetup {
    ProblemSetup {
        description: "Choose constants for f.".into(),
        func_name: "f".into(),
        seed_code: quadratic_code(&[0.0]),
        sense: Sense::Minimize,
    }
}

pub fn quadratic_code(values: &[f64]) -> String {
    let mut s = String::from("def f():\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("    c{i} = {v:?}\n"));
    }
    let names: Vec<String> = (0..values.len()).map(|i| format!("c{i}")).collect();
    s.push_str(&format!("    return [{}]\n", names.join(", ")));
    s
}

pub fn quadratic_fitness(code: &str) -> Option<f64> {
    ahd_core::ast_metric::normalize(code).ok()?;
    let params = identify_params(code, "");
    Some(1.0 + params.iter().map(|p| (p.value - 3.0).powi(2)).sum::<f64>())
}

pub fn quadratic_evaluator() -> FnEvaluator {
    FnEvaluator::new(Sense::Minimize, |code, _| match quadratic_fitness(code) {
        Some(f) => FitnessReport::ok(vec![f], Sense::Minimize),
        None => FitnessReport::failed(Failure::new(FailureKind::ParseError, "does not parse"), Sense::Minimize),
    })
}

pub fn small_config(islands: usize, pop: usize) -> RunConfig {
    let mut cfg = RunConfig::for_problem(ProblemKind::Tsp);
    cfg.islands.n = islands;
    cfg.islands.pop = pop;
    cfg.budget.generations = 5;
    cfg
}

pub fn member(code: &str, objective: f64, island: usize) -> Individual {
    Individual::new(code.into(), "f".into(), "t".into(), String::new(), objective, Origin { strategy: None, generation: 0, island })
}
