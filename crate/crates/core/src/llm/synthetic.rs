//! Deterministic offline stand-in for a chat model.
//!
//! Answers generation prompts with pure-Python heuristics drawn from a small
//! per-problem library or derived from the parents in the prompt by
//! perturbing their numeric constants. A configurable share of answers is
//! deliberately broken so failure handling gets exercised. Used to produce
//! transcripts for replay tests and for dry runs without an endpoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transport::{Completion, LlmRequest, Transport};
use super::LlmError;
use crate::strategy::PromptStrategy;
use crate::tuner::{identify_params, substitute};

const TSP_LIBRARY: &[(&str, &str)] = &[
    (
        "Move to the closest node while pulling towards the destination. The pull weight trades local greed for a shorter return leg.",
        "\
def {F}_v2(current_node, destination_node, unvisited_nodes, distance_matrix):
    pull = 0.2
    best_node = unvisited_nodes[0]
    best_score = float('inf')
    for node in unvisited_nodes:
        score = distance_matrix[current_node][node] - pull * distance_matrix[node][destination_node]
        if score < best_score:
            best_score = score
            best_node = node
    return best_node
",
    ),
    (
        "Score each node by its distance plus a one-step lookahead to its own nearest unvisited neighbour. This avoids stepping into isolated regions.",
        "\
def {F}_v2(current_node, destination_node, unvisited_nodes, distance_matrix):
    look = 0.3
    best_node = unvisited_nodes[0]
    best_score = float('inf')
    for node in unvisited_nodes:
        rest = [distance_matrix[node][other] for other in unvisited_nodes if other != node]
        ahead = min(rest) if rest else 0.0
        score = distance_matrix[current_node][node] + look * ahead
        if score < best_score:
            best_score = score
            best_node = node
    return best_node
",
    ),
    (
        "Prefer close nodes that sit in dense clusters of unvisited nodes. Density is the mean distance to the k nearest remaining nodes.",
        "\
def {F}_v2(current_node, destination_node, unvisited_nodes, distance_matrix):
    k = 3
    weight = 0.15
    def crowd(node):
        ds = sorted(distance_matrix[node][o] for o in unvisited_nodes if o != node)
        top = ds[:k]
        return sum(top) / len(top) if top else 0.0
    return min(unvisited_nodes, key=lambda n: distance_matrix[current_node][n] + weight * crowd(n))
",
    ),
];

const KP_LIBRARY: &[(&str, &str)] = &[
    (
        "Rank feasible items by value over a power of weight. The exponent shifts preference between light and valuable items.",
        "\
def {F}_v2(remaining_capacity, values, weights):
    power = 1.0
    best = None
    best_score = -1.0
    for i in range(len(values)):
        if weights[i] <= remaining_capacity:
            score = values[i] / (weights[i] ** power)
            if score > best_score:
                best_score = score
                best = i
    return best
",
    ),
    (
        "Use value density but penalise items that consume a large share of the remaining capacity. The penalty grows as the knapsack fills.",
        "\
def {F}_v2(remaining_capacity, values, weights):
    lam = 0.2
    fit = [i for i in range(len(values)) if weights[i] <= remaining_capacity]
    if not fit:
        return None
    return max(fit, key=lambda i: values[i] / weights[i] - lam * weights[i] / (remaining_capacity + 1e-9))
",
    ),
    (
        "Smooth the density ratio with additive offsets on value and weight. The offsets damp the influence of tiny weights.",
        "\
def {F}_v2(remaining_capacity, values, weights):
    a = 0.01
    b = 0.02
    best = None
    best_score = float('-inf')
    for i, (v, w) in enumerate(zip(values, weights)):
        if w > remaining_capacity:
            continue
        s = (v + a) / (w + b)
        if s > best_score:
            best_score = s
            best = i
    return best
",
    ),
];

const BPP_LIBRARY: &[(&str, &str)] = &[
    (
        "Best fit with a bonus for leaving almost no space. Near-perfect fills are rewarded beyond their raw tightness.",
        "\
def {F}_v2(item, bins_remain_cap):
    bonus = 5.0
    tight = 2
    scores = []
    for cap in bins_remain_cap:
        if cap < item:
            scores.append(float('-inf'))
        else:
            left = cap - item
            scores.append(-left + (bonus if left <= tight else 0.0))
    return scores
",
    ),
    (
        "Penalise leftover space with a linear and a quadratic term. The quadratic term discourages opening large gaps.",
        "\
def {F}_v2(item, bins_remain_cap):
    alpha = 1.0
    beta = 0.02
    return [float('-inf') if cap < item else -alpha * (cap - item) - beta * (cap - item) ** 2 for cap in bins_remain_cap]
",
    ),
    (
        "Blend best fit with a preference for older bins. Older bins are closed first, which keeps fewer bins half-full.",
        "\
def {F}_v2(item, bins_remain_cap):
    age = 0.5
    n = len(bins_remain_cap)
    return [float('-inf') if c < item else -(c - item) + age * (n - i) / n for i, c in enumerate(bins_remain_cap)]
",
    ),
];

const GENERIC_LIBRARY: &[(&str, &str)] = &[(
    "Return the first argument unchanged. A placeholder for unknown problems.",
    "def {F}_v2(*args):\n    return args[0]\n",
)];

fn library(func: &str) -> &'static [(&'static str, &'static str)] {
    match func {
        "select_next_node" => TSP_LIBRARY,
        "select_next_item" => KP_LIBRARY,
        "priority" => BPP_LIBRARY,
        _ => GENERIC_LIBRARY,
    }
}

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        let Some(close) = body.find("```") else { break };
        out.push(body[..close].trim_matches('\n').to_string());
        rest = &body[close + 3..];
    }
    out
}

fn func_name(user: &str, blocks: &[String]) -> String {
    if let Some(line) = user.lines().find_map(|l| l.strip_prefix("Function Signature: ")) {
        return line.trim().to_string();
    }
    if let Some(i) = user.find("implementation of ") {
        let name: String = user[i + 18..].chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        return name.trim_end_matches("_v2").to_string();
    }
    blocks
        .iter()
        .flat_map(|b| b.lines())
        .filter_map(|l| l.strip_prefix("def "))
        .map(|r| r.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect::<String>())
        .last()
        .map(|n| n.trim_end_matches("_v2").to_string())
        .unwrap_or_else(|| "heuristic".to_string())
}

/// Renames the policy definition (and recursive calls) to `<func>_v2`.
fn rename_entry(code: &str, func: &str) -> String {
    let target = format!("{func}_v2");
    if code.contains(&format!("def {target}(")) {
        return code.to_string();
    }
    code.replace(&format!("def {func}("), &format!("def {target}("))
        .replace(&format!(" {func}("), &format!(" {target}("))
}

fn jitter<R: Rng>(code: &str, spread: f64, rng: &mut R) -> (String, Vec<String>) {
    let params = identify_params(code, "");
    let values: Vec<f64> = params
        .iter()
        .map(|p| {
            let v = if p.value == 0.0 { rng.random_range(-0.1..0.1) } else { p.value * (1.0 + rng.random_range(-spread..spread)) };
            // Keep integer parameters moving even when the relative change is small.
            if p.integer && v.round() == p.value {
                p.value + if rng.random::<bool>() { 1.0 } else { -1.0 }
            } else {
                v
            }
        })
        .collect();
    let names = params.iter().map(|p| p.name.clone()).collect();
    (substitute(code, &params, &values), names)
}

fn respond(thought: &str, params: &[String], code: &str) -> String {
    let listed = if params.is_empty() {
        "- none".to_string()
    } else {
        params.iter().map(|p| format!("- {p}: numeric weight")).collect::<Vec<_>>().join("\n")
    };
    format!("[Thought]: {thought}\n\n[KEY PARAMETERS]:\n{listed}\n\n[Code]:\n```python\n{}\n```\n", code.trim_end())
}

pub struct SyntheticTransport {
    /// Share of generation answers that are deliberately unusable.
    pub failure_rate: f64,
}

impl Default for SyntheticTransport {
    fn default() -> Self {
        SyntheticTransport { failure_rate: 0.08 }
    }
}

impl SyntheticTransport {
    pub fn new(failure_rate: f64) -> Self {
        SyntheticTransport { failure_rate }
    }

    fn seed(req: &LlmRequest) -> u64 {
        let head = u64::from_str_radix(&req.digest[..16.min(req.digest.len())], 16).unwrap_or(0);
        head ^ req.occurrence.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (req.island as u64).rotate_left(32)
    }

    pub fn answer(&self, req: &LlmRequest) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(Self::seed(req));
        let user = req.messages.iter().rev().find(|m| m.role == super::Role::User).map_or("", |m| m.content.as_str());
        let blocks = fenced_blocks(user);
        let func = func_name(user, &blocks);
        if req.strategy == PromptStrategy::Insight {
            return format!(
                "The stronger heuristic commits to a single clear scoring rule for {func} and applies it consistently, while the weaker one mixes signals that often point in different directions.\n\n\
                 Its advantage comes from ranking candidates by a quantity that tracks the final objective closely; keeping that quantity and tuning its weight is the most promising direction."
            );
        }
        let roll: f64 = rng.random();
        if roll < self.failure_rate {
            return match rng.random_range(0..3) {
                0 => "I would combine a greedy rule with a lookahead, weighting both.".to_string(),
                1 => respond("Broken draft.", &[], &format!("def {func}_v2(:\n    pass\n")),
                _ => respond("Divides by zero.", &[], &format!("def {func}_v2(*args):\n    return 1 / 0\n")),
            };
        }
        let lib = library(&func);
        let fresh = |rng: &mut ChaCha8Rng| {
            let (thought, code) = lib[rng.random_range(0..lib.len())];
            (thought.to_string(), code.replace("{F}", &func))
        };
        let (thought, base, spread) = match (req.strategy, blocks.as_slice()) {
            (PromptStrategy::E1 | PromptStrategy::M1, _) | (_, []) => {
                let (t, c) = fresh(&mut rng);
                (t, c, 0.3)
            }
            (PromptStrategy::E2, bs) => {
                let pick = &bs[rng.random_range(0..bs.len())];
                ("Keep the shared greedy backbone and reweight its terms.".to_string(), rename_entry(pick, &func), 0.3)
            }
            (PromptStrategy::M2, bs) => ("Rescale the scoring weights of the current rule.".to_string(), rename_entry(&bs[0], &func), 0.4),
            (PromptStrategy::M3, bs) => ("Simplify by nudging the constants towards robust values.".to_string(), rename_entry(&bs[0], &func), 0.15),
            (PromptStrategy::Reset, bs) => {
                if rng.random::<bool>() {
                    let (t, c) = fresh(&mut rng);
                    (t, c, 0.3)
                } else {
                    ("Rebuild the elite rule with recalibrated weights.".to_string(), rename_entry(&bs[0], &func), 0.3)
                }
            }
            (PromptStrategy::Insight, _) => unreachable!(),
        };
        let (code, params) = jitter(&base, spread, &mut rng);
        respond(&thought, &params, &code)
    }
}

impl Transport for SyntheticTransport {
    fn complete(&self, req: &LlmRequest) -> Result<Completion, LlmError> {
        Ok(Completion::estimated(req, self.answer(req)))
    }
}
