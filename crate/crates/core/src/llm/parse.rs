use rustpython_parser::ast::{self, Stmt};
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub thought: String,
    pub key_params: String,
    pub code: String,
    pub entry: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MalformedResponse {
    #[error("response has no fenced code block")]
    NoCode,
    #[error("code block defines no function")]
    NoFunction,
}

const THOUGHT: &str = "[thought]";
const KEY_PARAMS: &str = "[key parameters]";
const CODE: &str = "[code]";

/// Finds the first fenced block; returns (start of the opening fence, body).
fn first_fence(text: &str) -> Option<(usize, String)> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    let close = body.find("```").unwrap_or(body.len());
    let code = body[..close].trim_matches('\n').to_string();
    Some((open, code))
}

/// Text after `marker` (case-insensitive) up to the next section marker or
/// code fence, with a leading colon and surrounding whitespace removed.
fn section(text: &str, lower: &str, marker: &str) -> Option<String> {
    let start = lower.find(marker)? + marker.len();
    let rest_lower = &lower[start..];
    let end = [THOUGHT, KEY_PARAMS, CODE, "```"]
        .iter()
        .filter_map(|m| rest_lower.find(m))
        .min()
        .unwrap_or(rest_lower.len());
    let body = text[start..start + end].trim_start_matches([':', '*']).trim_matches(|c: char| c.is_whitespace() || c == '*');
    Some(body.to_string())
}

fn defined_functions(code: &str) -> Vec<String> {
    if let Ok(suite) = ast::Suite::parse(code, "<candidate>") {
        return suite
            .iter()
            .filter_map(|s| match s {
                Stmt::FunctionDef(f) => Some(f.name.to_string()),
                _ => None,
            })
            .collect();
    }
    // Unparseable code still gets an entry name; evaluation reports the parse error.
    code.lines()
        .filter_map(|l| l.strip_prefix("def "))
        .filter_map(|rest| {
            let name: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
            (!name.is_empty()).then_some(name)
        })
        .collect()
}

/// Splits a completion into thought, key parameters and code. Only the code
/// block is mandatory. The entry is the last `*_v2` function, or failing that
/// the last top-level function.
pub fn parse_response(raw: &str) -> Result<ParsedResponse, MalformedResponse> {
    let (fence_at, code) = first_fence(raw).ok_or(MalformedResponse::NoCode)?;
    if code.trim().is_empty() {
        return Err(MalformedResponse::NoCode);
    }
    let names = defined_functions(&code);
    let entry = names
        .iter()
        .rev()
        .find(|n| n.ends_with("_v2"))
        .or(names.last())
        .cloned()
        .ok_or(MalformedResponse::NoFunction)?;
    let lower = raw.to_ascii_lowercase();
    let thought = section(raw, &lower, THOUGHT)
        .or_else(|| {
            let before = &raw[..fence_at];
            let open = before.find('{')?;
            let close = before[open..].find('}')? + open;
            Some(before[open + 1..close].trim().to_string())
        })
        .unwrap_or_default();
    let key_params = section(raw, &lower, KEY_PARAMS).unwrap_or_default();
    Ok(ParsedResponse { thought, key_params, code, entry })
}

#[cfg(test)]
mod tests {
    use super::*;

    const WELL_FORMED: &str = "\
[Thought]: Pick the nearest node but penalise nodes far from the depot. The penalty weight is tunable.

[KEY PARAMETERS]:
- alpha: weight of the depot penalty

[Code]:
```python
import math

def helper(x):
    return x

def select_next_node_v2(current_node, destination_node, unvisited_nodes, distance_matrix):
    alpha = 0.3
    return min(unvisited_nodes, key=lambda n: distance_matrix[current_node][n] + alpha * distance_matrix[n][destination_node])
```
Hope this helps.";

    #[test]
    fn well_formed_response() {
        let p = parse_response(WELL_FORMED).unwrap();
        assert!(p.thought.starts_with("Pick the nearest node"));
        assert!(p.thought.ends_with("tunable."));
        assert_eq!(p.key_params, "- alpha: weight of the depot penalty");
        assert!(p.code.starts_with("import math"));
        assert!(p.code.ends_with("destination_node])"));
        assert_eq!(p.entry, "select_next_node_v2");
    }

    #[test]
    fn missing_key_parameters_is_tolerated() {
        let p = parse_response("[Thought]: x.\n```\ndef priority(item, bins):\n    return bins\n```").unwrap();
        assert_eq!(p.key_params, "");
        assert_eq!(p.thought, "x.");
        assert_eq!(p.entry, "priority");
    }

    #[test]
    fn brace_description_is_a_thought_fallback() {
        let p = parse_response("{Greedy by density.}\n```python\ndef f_v2():\n    pass\n```").unwrap();
        assert_eq!(p.thought, "Greedy by density.");
    }

    #[test]
    fn malformed_responses() {
        assert_eq!(parse_response("I would use a greedy rule."), Err(MalformedResponse::NoCode));
        assert_eq!(parse_response("```python\nx = 1\n```"), Err(MalformedResponse::NoFunction));
        assert_eq!(parse_response("```python\n\n```"), Err(MalformedResponse::NoCode));
        // Broken code still yields an entry; evaluation will reject it.
        assert_eq!(parse_response("```\ndef g_v2(:\n```").unwrap().entry, "g_v2");
        // An unterminated fence takes the rest of the text.
        assert_eq!(parse_response("```python\ndef h(a):\n    return a\n").unwrap().entry, "h");
    }

    #[test]
    fn never_panics_on_odd_text() {
        for s in ["", "```", "[Thought]", "[Code]```", "{", "}{```\n```", "[KEY PARAMETERS]:\n```py\ndef é(): pass```"] {
            let _ = parse_response(s);
        }
    }
}
