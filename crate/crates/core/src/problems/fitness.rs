use std::fmt;

use serde::{Deserialize, Serialize};

use crate::guest::{GuestError, GuestErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    ParseError,
    ExecError,
    Timeout,
    ProtocolError,
    Infeasible,
}

impl FailureKind {
    pub fn tag(self) -> &'static str {
        match self {
            FailureKind::ParseError => "parse_error",
            FailureKind::ExecError => "exec_error",
            FailureKind::Timeout => "timeout",
            FailureKind::ProtocolError => "protocol_error",
            FailureKind::Infeasible => "infeasible",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "parse_error" => FailureKind::ParseError,
            "exec_error" => FailureKind::ExecError,
            "timeout" => FailureKind::Timeout,
            "protocol_error" => FailureKind::ProtocolError,
            "infeasible" => FailureKind::Infeasible,
            _ => return None,
        })
    }
}

/// Why a candidate could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Failure { kind, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Failure::new(FailureKind::Infeasible, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.tag(), self.message)
    }
}

impl std::error::Error for Failure {}

impl From<GuestError> for Failure {
    fn from(e: GuestError) -> Self {
        let kind = match e.kind {
            GuestErrorKind::Parse => FailureKind::ParseError,
            GuestErrorKind::Exec => FailureKind::ExecError,
            GuestErrorKind::Timeout => FailureKind::Timeout,
        };
        Failure { kind, message: e.message }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Per-instance objectives in the problem's native sense, or the failure
/// that prevented scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub per_instance: Vec<f64>,
    pub sense: Sense,
    pub failure: Option<Failure>,
}

impl FitnessReport {
    pub fn ok(per_instance: Vec<f64>, sense: Sense) -> Self {
        FitnessReport { per_instance, sense, failure: None }
    }

    pub fn failed(failure: Failure, sense: Sense) -> Self {
        FitnessReport { per_instance: Vec::new(), sense, failure: Some(failure) }
    }

    /// Mean objective in the native sense, `None` on failure.
    pub fn mean(&self) -> Option<f64> {
        if self.failure.is_some() || self.per_instance.is_empty() {
            return None;
        }
        Some(self.per_instance.iter().sum::<f64>() / self.per_instance.len() as f64)
    }

    pub fn fitness(&self) -> f64 {
        aggregate_fitness(self)
    }
}

/// Scalar fitness to minimise. Maximisation objectives are negated; failed or
/// non-finite evaluations are `+inf`.
pub fn aggregate_fitness(report: &FitnessReport) -> f64 {
    match report.mean() {
        Some(m) if m.is_finite() => match report.sense {
            Sense::Minimize => m,
            Sense::Maximize => -m,
        },
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximisation_is_negated_and_failures_are_infinite() {
        assert_eq!(aggregate_fitness(&FitnessReport::ok(vec![1.0, 3.0], Sense::Minimize)), 2.0);
        assert_eq!(aggregate_fitness(&FitnessReport::ok(vec![1.0, 3.0], Sense::Maximize)), -2.0);
        let f = FitnessReport::failed(Failure::infeasible("x"), Sense::Maximize);
        assert_eq!(aggregate_fitness(&f), f64::INFINITY);
        assert_eq!(aggregate_fitness(&FitnessReport::ok(vec![f64::NAN], Sense::Minimize)), f64::INFINITY);
        assert_eq!(aggregate_fitness(&FitnessReport::ok(vec![], Sense::Minimize)), f64::INFINITY);
    }

    #[test]
    fn failure_tags_round_trip() {
        for k in [
            FailureKind::ParseError,
            FailureKind::ExecError,
            FailureKind::Timeout,
            FailureKind::ProtocolError,
            FailureKind::Infeasible,
        ] {
            assert_eq!(FailureKind::from_tag(k.tag()), Some(k));
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.tag()));
        }
    }
}
