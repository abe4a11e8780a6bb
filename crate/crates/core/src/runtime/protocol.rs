//! Line-delimited JSON protocol between the engine and a harness process.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::problems::{evaluate_code_serial, BatchLimits, Failure, FailureKind, Instance, ProblemKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRequest {
    pub id: String,
    pub code: String,
    pub entry: String,
    pub problem: String,
    pub instances: Vec<Instance>,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub id: String,
    pub ok: bool,
    pub objectives: Option<Vec<f64>>,
    pub error: Option<ErrorBody>,
}

impl ExecutionResult {
    pub fn success(id: impl Into<String>, objectives: Vec<f64>) -> Self {
        ExecutionResult { id: id.into(), ok: true, objectives: Some(objectives), error: None }
    }

    pub fn failure(id: impl Into<String>, kind: FailureKind, message: impl Into<String>) -> Self {
        ExecutionResult { id: id.into(), ok: false, objectives: None, error: Some(ErrorBody { kind, message: message.into() }) }
    }

    /// One protocol line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("result serializes")
    }

    /// Parses a response line and checks the shape invariants.
    pub fn from_line(line: &str) -> Result<Self, String> {
        let r: ExecutionResult = serde_json::from_str(line).map_err(|e| format!("bad response line: {e}"))?;
        match (&r.objectives, &r.error, r.ok) {
            (Some(_), None, true) | (None, Some(_), false) => Ok(r),
            _ => Err("response must carry exactly one of objectives/error, matching ok".into()),
        }
    }
}

impl ExecutionRequest {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

fn protocol_error(id: &str, message: impl Into<String>) -> ExecutionResult {
    ExecutionResult::failure(id, FailureKind::ProtocolError, message)
}

/// Validates one request line. Malformed input yields the protocol-error
/// response to send back (with the request id when it could be read).
pub fn parse_request(line: &str) -> Result<(ExecutionRequest, ProblemKind), ExecutionResult> {
    let raw: Json = serde_json::from_str(line).map_err(|e| protocol_error("", format!("request is not JSON: {e}")))?;
    let id = raw.get("id").and_then(Json::as_str).unwrap_or("").to_string();
    let req: ExecutionRequest = serde_json::from_value(raw).map_err(|e| protocol_error(&id, format!("malformed request: {e}")))?;
    let kind = ProblemKind::from_tag(&req.problem).ok_or_else(|| protocol_error(&id, format!("unknown problem tag {:?}", req.problem)))?;
    if req.timeout_ms == 0 {
        return Err(protocol_error(&id, "timeout_ms must be positive"));
    }
    if let Some(bad) = req.instances.iter().position(|i| i.kind() != kind) {
        return Err(protocol_error(&id, format!("instance {bad} is not a {} instance", kind.tag())));
    }
    for (i, inst) in req.instances.iter().enumerate() {
        inst.validate().map_err(|e| protocol_error(&id, format!("instance {i}: {e}")))?;
    }
    Ok((req, kind))
}

/// Guest-side handling of one request line with the embedded interpreter.
pub fn handle_line(line: &str, step_limit: u64) -> ExecutionResult {
    let (req, _) = match parse_request(line) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let limits = BatchLimits { step_limit, timeout: Some(std::time::Duration::from_millis(req.timeout_ms)) };
    let report = evaluate_code_serial(&req.code, &req.entry, &req.instances, limits);
    match report.failure {
        Some(Failure { kind, message }) => ExecutionResult::failure(req.id, kind, truncate(&message, 2000)),
        None => ExecutionResult::success(req.id, report.per_instance),
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{generate_instances, Scale};

    #[test]
    fn field_order_is_exact() {
        let ok = ExecutionResult::success("a", vec![1.5, 2.0]);
        assert_eq!(ok.to_line(), r#"{"id":"a","ok":true,"objectives":[1.5,2.0],"error":null}"#);
        let bad = ExecutionResult::failure("b", FailureKind::Timeout, "slow");
        assert_eq!(bad.to_line(), r#"{"id":"b","ok":false,"objectives":null,"error":{"kind":"timeout","message":"slow"}}"#);
        let req = ExecutionRequest {
            id: "r".into(),
            code: "x".into(),
            entry: "f".into(),
            problem: "bpp_online".into(),
            instances: vec![],
            timeout_ms: 5,
        };
        assert_eq!(req.to_line(), r#"{"id":"r","code":"x","entry":"f","problem":"bpp_online","instances":[],"timeout_ms":5}"#);
    }

    #[test]
    fn response_shape_is_checked() {
        assert!(ExecutionResult::from_line(r#"{"id":"a","ok":true,"objectives":null,"error":null}"#).is_err());
        assert!(ExecutionResult::from_line(r#"{"id":"a","ok":false,"objectives":[1],"error":null}"#).is_err());
        assert!(ExecutionResult::from_line(r#"{"id":"a","ok":true,"objectives":[1],"error":null}"#).is_ok());
    }

    #[test]
    fn malformed_requests_are_protocol_errors() {
        for (line, id) in [
            ("not json", ""),
            (r#"{"id":"q"}"#, "q"),
            (r#"{"id":"q","code":"","entry":"f","problem":"vrp","instances":[],"timeout_ms":10}"#, "q"),
            (r#"{"id":"q","code":"","entry":"f","problem":"kp","instances":[{"coords":[[0,0]]}],"timeout_ms":10}"#, "q"),
            (r#"{"id":"q","code":"","entry":"f","problem":"kp","instances":[],"timeout_ms":0}"#, "q"),
        ] {
            let r = handle_line(line, 1000);
            assert_eq!(r.id, id, "{line}");
            assert_eq!(r.error.unwrap().kind, FailureKind::ProtocolError, "{line}");
        }
    }

    #[test]
    fn valid_request_is_evaluated() {
        let set = generate_instances(ProblemKind::Kp, Scale::new(10), 2, 3).unwrap();
        let req = ExecutionRequest {
            id: "k".into(),
            code: crate::problems::problem_spec(ProblemKind::Kp).seed_code.into(),
            entry: "select_next_item".into(),
            problem: "kp".into(),
            instances: set.instances.clone(),
            timeout_ms: 10_000,
        };
        let r = handle_line(&req.to_line(), 10_000_000);
        let want: Vec<f64> = set.instances.iter().map(|i| crate::problems::evaluate_native(i).unwrap()).collect();
        assert_eq!(r.objectives.unwrap(), want);
    }
}
