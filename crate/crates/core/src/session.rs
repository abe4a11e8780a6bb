//! Whole runs: building the gateway and evaluator from a configuration,
//! driving the engine against a run directory, and resuming from it.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::engine::{
    load_checkpoint, unix_ms, BestHeuristic, Engine, EngineError, HaltReason, ProblemSetup, RunDir, RunManifest, RunOutcome,
};
use crate::llm::LlmError;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("transport: {0}")]
    Transport(LlmError),
    #[error("{0}")]
    Runtime(String),
}

impl SessionError {
    /// Process exit code: 1 configuration, 2 runtime, 3 transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::Config(_) => 1,
            SessionError::Runtime(_) => 2,
            SessionError::Transport(_) => 3,
        }
    }
}

impl From<EngineError> for SessionError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Llm { source, generation } => match source {
                LlmError::Io(_) => SessionError::Runtime(format!("generation {generation}: {source}")),
                other => SessionError::Transport(other),
            },
            other => SessionError::Runtime(other.to_string()),
        }
    }
}

fn io_err(e: std::io::Error) -> SessionError {
    SessionError::Runtime(e.to_string())
}

fn llm_err(e: LlmError) -> SessionError {
    match e {
        LlmError::Io(m) => SessionError::Config(ConfigError::Read { path: "llm.transcript".into(), message: m }),
        other => SessionError::Transport(other),
    }
}

/// What a finished run leaves behind.
#[derive(Debug)]
pub struct Finished {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub outcome: RunOutcome,
}

/// Default run directory: `<output.dir>/<problem>-<unix ms>`.
pub fn default_run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.dir.join(format!("{}-{}", cfg.problem.kind.tag(), unix_ms()))
}

fn drive(cfg: RunConfig, dir: RunDir, resume: Option<crate::engine::RunState>, mut manifest: RunManifest) -> Result<Finished, SessionError> {
    let set = cfg.training_set()?;
    let evaluator = cfg.build_evaluator(&set)?;
    let gateway = cfg.build_gateway().map_err(llm_err)?;
    let engine = Engine::new(cfg.clone(), ProblemSetup::for_kind(cfg.problem.kind), &gateway, evaluator.as_ref());
    let mut sink = dir.clone();
    let result = engine.run(resume, &mut sink);
    manifest.network_calls += gateway.network_calls();
    manifest.finished_unix_ms = Some(unix_ms());
    match result {
        Ok(outcome) => {
            let best = &outcome.state.archive.best;
            manifest.generations = outcome.state.generation;
            manifest.evaluations = outcome.state.evaluations;
            manifest.tokens = outcome.state.tokens;
            manifest.halted = Some(outcome.halted);
            manifest.best = Some(BestHeuristic {
                code: best.code.clone(),
                entry: best.entry.clone(),
                objective: best.native_objective(cfg.problem.kind.sense()),
                fitness: best.objective,
                tuned: best.tuned,
            });
            dir.write_manifest(&manifest).map_err(io_err)?;
            Ok(Finished { dir: dir.path().to_path_buf(), manifest, outcome })
        }
        Err(e) => {
            if let Ok(state) = load_checkpoint(&dir.checkpoint_path()) {
                manifest.generations = state.generation;
                manifest.evaluations = state.evaluations;
                manifest.tokens = state.tokens;
            }
            dir.write_manifest(&manifest).map_err(io_err)?;
            Err(e.into())
        }
    }
}

/// Starts a fresh run in `dir`.
pub fn start(cfg: RunConfig, dir: &Path) -> Result<Finished, SessionError> {
    cfg.validate()?;
    // Fail on a missing credential before touching the disk.
    if cfg.llm.transport == crate::config::TransportKind::Live {
        crate::llm::LiveTransport::api_key_from_env(&cfg.llm.api_key_env).map_err(SessionError::Transport)?;
    }
    let run = RunDir::create(dir).map_err(io_err)?;
    run.write_config(&cfg).map_err(io_err)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        started_unix_ms: unix_ms(),
        finished_unix_ms: None,
        generations: 0,
        evaluations: 0,
        tokens: Default::default(),
        network_calls: 0,
        halted: None,
        best: None,
    };
    run.write_manifest(&manifest).map_err(io_err)?;
    drive(cfg, run, None, manifest)
}

/// Continues the run in `dir` from its last checkpoint. Overrides apply on
/// top of the stored configuration (typically a larger budget).
pub fn resume(dir: &Path, overrides: &[(String, String)]) -> Result<Finished, SessionError> {
    let run = RunDir::open(dir).map_err(|e| SessionError::Config(ConfigError::Read { path: dir.display().to_string(), message: e.to_string() }))?;
    let cfg = RunConfig::load(&run.config_path(), overrides)?;
    let state = load_checkpoint(&run.checkpoint_path())
        .map_err(|e| SessionError::Config(ConfigError::Read { path: run.checkpoint_path().display().to_string(), message: e.to_string() }))?;
    if state.islands.len() != cfg.islands.n {
        return Err(ConfigError::Invalid { field: "islands.n", message: "does not match the checkpoint".into() }.into());
    }
    if cfg.llm.transport == crate::config::TransportKind::Live {
        crate::llm::LiveTransport::api_key_from_env(&cfg.llm.api_key_env).map_err(SessionError::Transport)?;
    }
    run.truncate_telemetry(state.telemetry_lines).map_err(io_err)?;
    run.write_config(&cfg).map_err(io_err)?;
    let mut manifest = run.read_manifest().map_err(io_err)?;
    manifest.config = cfg.clone();
    manifest.halted = None::<HaltReason>;
    drive(cfg, run, Some(state), manifest)
}
