//! Run directory layout: `checkpoint.json` (rewritten atomically each
//! generation), `telemetry.jsonl` (append only), `manifest.json` and
//! `best.py`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::state::{RunState, TelemetryRecord};
use super::HaltReason;
use crate::config::RunConfig;
use crate::llm::TokenCounts;

/// Receives the state at every generation boundary.
pub trait Checkpointer {
    fn commit(&mut self, state: &RunState, records: &[TelemetryRecord]) -> io::Result<()>;
}

/// Keeps nothing.
pub struct NoPersist;

impl Checkpointer for NoPersist {
    fn commit(&mut self, _: &RunState, _: &[TelemetryRecord]) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestHeuristic {
    pub code: String,
    pub entry: String,
    /// In the problem's own sense (tour length, packed value, bins).
    pub objective: f64,
    /// Minimised fitness as used by the engine.
    pub fitness: f64,
    pub tuned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
    pub generations: u64,
    pub evaluations: u64,
    pub tokens: TokenCounts,
    pub network_calls: u64,
    pub halted: Option<HaltReason>,
    pub best: Option<BestHeuristic>,
}

pub fn unix_ms() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

impl RunDir {
    /// Creates the directory (and parents) if needed.
    pub fn create(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        fs::create_dir_all(&path)?;
        Ok(RunDir { path })
    }

    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        if !path.is_dir() {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("no run directory at {}", path.display())));
        }
        Ok(RunDir { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.path.join("checkpoint.json")
    }

    pub fn telemetry_path(&self) -> PathBuf {
        self.path.join("telemetry.jsonl")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path.join("manifest.json")
    }

    pub fn best_path(&self) -> PathBuf {
        self.path.join("best.py")
    }

    pub fn config_path(&self) -> PathBuf {
        self.path.join("config.toml")
    }

    pub fn write_manifest(&self, m: &RunManifest) -> io::Result<()> {
        let text = serde_json::to_string_pretty(m).map_err(io::Error::other)?;
        write_atomic(&self.manifest_path(), text.as_bytes())
    }

    pub fn read_manifest(&self) -> io::Result<RunManifest> {
        let text = fs::read_to_string(self.manifest_path())?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn write_config(&self, cfg: &RunConfig) -> io::Result<()> {
        let text = cfg.to_toml();
        write_atomic(&self.config_path(), text.as_bytes())
    }

    /// Drops telemetry lines written after the last checkpoint.
    pub fn truncate_telemetry(&self, lines: u64) -> io::Result<()> {
        let path = self.telemetry_path();
        if !path.exists() {
            return Ok(());
        }
        let mut keep = 0u64;
        let mut kept = 0u64;
        let mut reader = BufReader::new(File::open(&path)?);
        let mut buf = Vec::new();
        while kept < lines {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf)?;
            if n == 0 {
                break;
            }
            keep += n as u64;
            kept += 1;
        }
        OpenOptions::new().write(true).open(&path)?.set_len(keep)
    }
}

impl Checkpointer for RunDir {
    fn commit(&mut self, state: &RunState, records: &[TelemetryRecord]) -> io::Result<()> {
        let file = OpenOptions::new().create(true).append(true).open(self.telemetry_path())?;
        let mut w = BufWriter::new(file);
        for r in records {
            serde_json::to_writer(&mut w, r).map_err(io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        let ckpt = serde_json::to_vec(state).map_err(io::Error::other)?;
        write_atomic(&self.checkpoint_path(), &ckpt)?;
        write_atomic(&self.best_path(), state.archive.best.code.as_bytes())
    }
}

pub fn load_checkpoint(path: &Path) -> io::Result<RunState> {
    let bytes = fs::read(path)?;
    let mut state: RunState = serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    state.rebuild_caches();
    Ok(state)
}

pub fn read_telemetry(path: &Path) -> io::Result<Vec<TelemetryRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("telemetry line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
