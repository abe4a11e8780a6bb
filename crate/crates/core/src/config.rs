//! Run configuration: a TOML document with one table per concern, dotted
//! command-line overrides, validation and construction of the gateway and
//! evaluator it describes.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Gateway, LiveConfig, LiveTransport, LlmError, RecordingTransport, ReplayTransport, SyntheticTransport, Transport};
use crate::problems::{generate_instances, BatchLimits, InstanceSet, ProblemKind, Scale};
use crate::runtime::{default_harness_program, Evaluator, HarnessCommand, HarnessEvaluator, InterpreterEvaluator, Supervisor};
use crate::tuner::TunerConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("bad override {0:?}: expected key=value or --key value")]
    Override(String),
    #[error("invalid value for {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Nodes, items or stream length; defaults per problem.
    #[serde(default)]
    pub n: Option<usize>,
    /// Knapsack limit or bin capacity; defaults per problem and size.
    #[serde(default)]
    pub capacity: Option<f64>,
    #[serde(default)]
    pub train_count: Option<usize>,
    #[serde(default)]
    pub train_seed: u64,
}

impl ProblemConfig {
    pub fn scale(&self) -> Scale {
        let n = self.n.unwrap_or(default_n(self.kind));
        Scale { n, capacity: Some(self.capacity.unwrap_or_else(|| Scale::new(n).capacity_for(self.kind))) }
    }
}

fn default_n(kind: ProblemKind) -> usize {
    match kind {
        ProblemKind::Tsp => 50,
        ProblemKind::Kp => 100,
        ProblemKind::BppOnline => 1000,
    }
}

fn default_train_count(kind: ProblemKind) -> usize {
    match kind {
        ProblemKind::Tsp | ProblemKind::Kp => 64,
        ProblemKind::BppOnline => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IslandsConfig {
    pub n: usize,
    pub pop: usize,
    pub tau: f64,
    pub i_stag: u32,
    pub i_cool: u64,
    pub s_mig: u32,
    /// Parents per crossover prompt.
    pub parents: usize,
    pub tournament: usize,
    /// Generation attempts per missing member when filling initial populations.
    pub init_attempts: usize,
    /// Refresh the island's own insight whenever its elite improves.
    pub local_insight: bool,
}

impl Default for IslandsConfig {
    fn default() -> Self {
        IslandsConfig {
            n: 6,
            pop: 8,
            tau: 0.7,
            i_stag: 8,
            i_cool: 2,
            s_mig: 3,
            parents: 2,
            tournament: 2,
            init_attempts: 2,
            local_insight: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub c: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig { c: std::f64::consts::SQRT_2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Live,
    Replay,
    /// Offline generator; see [`SyntheticTransport`].
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub transport: TransportKind,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Transcript read in replay mode and appended to when `record` is set.
    pub transcript: Option<PathBuf>,
    pub record: bool,
    /// Environment variable holding the API key (live mode only).
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub backoff_ms: u64,
    pub request_timeout_ms: u64,
    pub synthetic_failure_rate: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            transport: TransportKind::Live,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            temperature: 1.0,
            transcript: None,
            record: false,
            api_key_env: "AHD_API_KEY".into(),
            max_in_flight: 8,
            attempts: 3,
            backoff_ms: 1000,
            request_timeout_ms: 120_000,
            synthetic_failure_rate: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Embedded interpreter, in process.
    Interpreter,
    /// External harness processes speaking the line protocol.
    Harness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub backend: Backend,
    pub timeout_ms: u64,
    pub max_parallel: usize,
    pub memory_limit_mb: u64,
    /// Interpreter step budget per instance.
    pub step_limit: u64,
    /// Harness executable; defaults to `ahd-guest` next to the running binary.
    pub harness: Option<PathBuf>,
    pub harness_args: Vec<String>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            backend: Backend::Interpreter,
            timeout_ms: 30_000,
            max_parallel: 8,
            memory_limit_mb: 1024,
            step_limit: 200_000_000,
            harness: None,
            harness_args: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub generations: u64,
    pub max_evaluations: Option<u64>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig { generations: 800, max_evaluations: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Parent directory of timestamped run directories.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("runs") }
    }
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub islands: IslandsConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub tuner: TunerConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parses a scalar override value as TOML, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(key.into()));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(key.into()))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `["--a.b", "1", "c.d=x"]` style arguments into `(key, value)` pairs.
pub fn parse_overrides<S: AsRef<str>>(args: &[S]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = args[i].as_ref().trim_start_matches("--");
        if let Some((k, v)) = a.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            i += 1;
        } else if i + 1 < args.len() {
            out.push((a.to_string(), args[i + 1].as_ref().to_string()));
            i += 2;
        } else {
            return Err(ConfigError::Override(a.into()));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// A configuration with every default and the given problem.
    pub fn for_problem(kind: ProblemKind) -> Self {
        RunConfig {
            master_seed: default_seed(),
            problem: ProblemConfig { kind, n: None, capacity: None, train_count: None, train_seed: 0 },
            islands: IslandsConfig::default(),
            scheduler: SchedulerConfig::default(),
            tuner: TunerConfig::default(),
            llm: LlmConfig::default(),
            runtime: RuntimeConfig::default(),
            budget: BudgetConfig::default(),
            output: OutputConfig::default(),
        }
        .resolved()
    }

    /// Parses TOML text, applies overrides, fills per-problem defaults and validates.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for (k, v) in overrides {
            set_path(&mut table, k, override_value(v))?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Materializes problem defaults that depend on the problem kind.
    pub fn resolved(mut self) -> Self {
        let kind = self.problem.kind;
        let scale = self.problem.scale();
        self.problem.n = Some(scale.n);
        if kind != ProblemKind::Tsp {
            self.problem.capacity = scale.capacity;
        }
        self.problem.train_count.get_or_insert(default_train_count(kind));
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, message: &str| Err(ConfigError::Invalid { field, message: message.into() });
        if self.master_seed > i64::MAX as u64 {
            return bad("master_seed", "must fit a TOML integer (at most 2^63 - 1)");
        }
        let i = &self.islands;
        if i.n == 0 {
            return bad("islands.n", "at least one island is required");
        }
        if i.pop == 0 {
            return bad("islands.pop", "populations need at least one member");
        }
        if !(0.0..=1.0).contains(&i.tau) {
            return bad("islands.tau", "must lie in [0, 1]");
        }
        if i.i_stag == 0 {
            return bad("islands.i_stag", "must be positive");
        }
        if i.parents < 2 {
            return bad("islands.parents", "crossover needs at least 2 parents");
        }
        if i.tournament == 0 {
            return bad("islands.tournament", "must be positive");
        }
        if !(self.scheduler.c > 0.0 && self.scheduler.c.is_finite()) {
            return bad("scheduler.c", "must be positive");
        }
        let t = &self.tuner;
        if t.n_tune < 3 {
            return bad("tuner.n_tune", "rand/1 needs at least 3 perturbed vectors");
        }
        if !(t.f > 0.0 && t.f <= 2.0) {
            return bad("tuner.f", "must lie in (0, 2]");
        }
        if !(0.0..=1.0).contains(&t.cr) {
            return bad("tuner.cr", "must lie in [0, 1]");
        }
        if !(t.rho > 0.0) || !(t.eps0 >= 0.0) || !(t.theta >= 0.0) {
            return bad("tuner", "rho must be positive, eps0 and theta non-negative");
        }
        if !(self.llm.temperature >= 0.0) {
            return bad("llm.temperature", "must be non-negative");
        }
        if self.llm.transport == TransportKind::Replay && self.llm.transcript.is_none() {
            return bad("llm.transcript", "replay needs a transcript file");
        }
        if self.llm.record && self.llm.transcript.is_none() {
            return bad("llm.transcript", "recording needs a transcript file");
        }
        if self.llm.record && self.llm.transport == TransportKind::Replay {
            return bad("llm.record", "cannot record while replaying");
        }
        if !(0.0..=1.0).contains(&self.llm.synthetic_failure_rate) {
            return bad("llm.synthetic_failure_rate", "must lie in [0, 1]");
        }
        if self.runtime.timeout_ms == 0 {
            return bad("runtime.timeout_ms", "must be positive");
        }
        if self.runtime.max_parallel == 0 {
            return bad("runtime.max_parallel", "must be positive");
        }
        if self.problem.scale().n == 0 || self.problem.train_count == Some(0) {
            return bad("problem", "n and train_count must be positive");
        }
        if let Some(c) = self.problem.capacity {
            if !(c > 0.0 && c.is_finite()) {
                return bad("problem.capacity", "must be positive");
            }
        }
        Ok(())
    }

    pub fn training_set(&self) -> Result<InstanceSet, ConfigError> {
        generate_instances(self.problem.kind, self.problem.scale(), self.problem.train_count.unwrap_or(1), self.problem.train_seed)
            .map_err(|e| ConfigError::Invalid { field: "problem", message: e.to_string() })
    }

    /// Builds the transport stack. Live mode reads the credential here, so a
    /// missing key fails before any evaluation.
    pub fn build_gateway(&self) -> Result<Gateway, LlmError> {
        let l = &self.llm;
        let base: Box<dyn Transport> = match l.transport {
            TransportKind::Live => {
                let api_key = LiveTransport::api_key_from_env(&l.api_key_env)?;
                Box::new(LiveTransport::new(LiveConfig {
                    endpoint: l.endpoint.clone(),
                    model: l.model.clone(),
                    api_key,
                    max_in_flight: l.max_in_flight,
                    attempts: l.attempts,
                    backoff: Duration::from_millis(l.backoff_ms),
                    timeout: Duration::from_millis(l.request_timeout_ms),
                }))
            }
            TransportKind::Replay => Box::new(ReplayTransport::load(l.transcript.as_deref().expect("validated"))?),
            TransportKind::Synthetic => Box::new(SyntheticTransport::new(l.synthetic_failure_rate)),
        };
        let transport = match (&l.transcript, l.record) {
            (Some(path), true) => Box::new(RecordingTransport::new(base, path)?) as Box<dyn Transport>,
            _ => base,
        };
        Ok(Gateway::new(transport, l.temperature))
    }

    pub fn build_evaluator(&self, set: &InstanceSet) -> Result<Box<dyn Evaluator>, ConfigError> {
        let r = &self.runtime;
        Ok(match r.backend {
            Backend::Interpreter => Box::new(InterpreterEvaluator::new(
                set.instances.clone(),
                BatchLimits { step_limit: r.step_limit, timeout: Some(Duration::from_millis(r.timeout_ms)) },
            )),
            Backend::Harness => {
                let program = r.harness.clone().or_else(default_harness_program).ok_or(ConfigError::Invalid {
                    field: "runtime.harness",
                    message: "no harness configured and no ahd-guest binary found next to this executable".into(),
                })?;
                let mut cmd = HarnessCommand::new(program);
                cmd.args = r.harness_args.clone();
                cmd.memory_limit = (r.memory_limit_mb > 0).then_some(r.memory_limit_mb << 20);
                let sup = Arc::new(Supervisor::new(cmd, r.max_parallel));
                Box::new(HarnessEvaluator::new(sup, set.kind, set.instances.clone(), Duration::from_millis(r.timeout_ms)))
            }
        })
    }
}
