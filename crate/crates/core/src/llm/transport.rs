use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{LlmError, Message};
use crate::strategy::PromptStrategy;

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub strategy: PromptStrategy,
    pub island: usize,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub digest: String,
    /// How many earlier requests from this island had the same digest.
    pub occurrence: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Rough token count used when the endpoint does not report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

impl Completion {
    pub fn estimated(req: &LlmRequest, text: String) -> Self {
        let prompt_tokens = req.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        let completion_tokens = estimate_tokens(&text);
        Completion { text, prompt_tokens, completion_tokens }
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &LlmRequest) -> Result<Completion, LlmError>;

    /// Number of network requests issued so far.
    fn network_calls(&self) -> u64 {
        0
    }
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub digest: String,
    pub island: usize,
    pub occurrence: u64,
    pub strategy: PromptStrategy,
    pub response: String,
}

/// Serves recorded responses keyed by (digest, island, occurrence). Once an
/// island has used every recording for a digest, the last one is repeated.
pub struct ReplayTransport {
    records: HashMap<(String, usize), Vec<(u64, String)>>,
    by_digest: HashMap<String, String>,
}

impl ReplayTransport {
    pub fn from_records(records: impl IntoIterator<Item = TranscriptRecord>) -> Self {
        let mut map: HashMap<(String, usize), Vec<(u64, String)>> = HashMap::new();
        let mut by_digest = HashMap::new();
        for r in records {
            by_digest.insert(r.digest.clone(), r.response.clone());
            map.entry((r.digest, r.island)).or_default().push((r.occurrence, r.response));
        }
        for v in map.values_mut() {
            v.sort_by_key(|(k, _)| *k);
        }
        ReplayTransport { records: map, by_digest }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let file = File::open(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| LlmError::Io(format!("{}:{}: {e}", path.display(), no + 1)))?;
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, req: &LlmRequest) -> Result<Completion, LlmError> {
        let text = match self.records.get(&(req.digest.clone(), req.island)) {
            Some(list) => list
                .iter()
                .find(|(k, _)| *k == req.occurrence)
                .or(list.last())
                .map(|(_, t)| t.clone()),
            None => self.by_digest.get(&req.digest).cloned(),
        };
        text.map(|t| Completion::estimated(req, t))
            .ok_or_else(|| LlmError::ReplayMiss { digest: req.digest.clone() })
    }
}

/// Forwards to another transport and appends every exchange to a transcript.
pub struct RecordingTransport {
    inner: Box<dyn Transport>,
    out: Mutex<File>,
}

impl RecordingTransport {
    pub fn new(inner: Box<dyn Transport>, path: &Path) -> Result<Self, LlmError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Ok(RecordingTransport { inner, out: Mutex::new(out) })
    }
}

impl Transport for RecordingTransport {
    fn complete(&self, req: &LlmRequest) -> Result<Completion, LlmError> {
        let c = self.inner.complete(req)?;
        let rec = TranscriptRecord {
            digest: req.digest.clone(),
            island: req.island,
            occurrence: req.occurrence,
            strategy: req.strategy,
            response: c.text.clone(),
        };
        let mut line = serde_json::to_string(&rec).map_err(|e| LlmError::Io(e.to_string()))?;
        line.push('\n');
        let mut out = self.out.lock().unwrap();
        out.write_all(line.as_bytes()).map_err(|e| LlmError::Io(e.to_string()))?;
        out.flush().map_err(|e| LlmError::Io(e.to_string()))?;
        Ok(c)
    }

    fn network_calls(&self) -> u64 {
        self.inner.network_calls()
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Clone, PartialEq)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub api_key: String,
    pub max_in_flight: usize,
    /// Total attempts per request.
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl std::fmt::Debug for LiveConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &"<redacted>")
            .field("max_in_flight", &self.max_in_flight)
            .field("attempts", &self.attempts)
            .finish()
    }
}

/// OpenAI-compatible chat-completions client.
pub struct LiveTransport {
    cfg: LiveConfig,
    agent: ureq::Agent,
    slots: Semaphore,
    calls: AtomicU64,
}

impl LiveTransport {
    pub fn new(cfg: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        let slots = Semaphore { free: Mutex::new(cfg.max_in_flight.max(1)), cv: Condvar::new() };
        LiveTransport { cfg, agent, slots, calls: AtomicU64::new(0) }
    }

    /// Reads the credential from `var`; never persisted anywhere.
    pub fn api_key_from_env(var: &str) -> Result<String, LlmError> {
        match std::env::var(var) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(LlmError::Credential(var.to_string())),
        }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, req: &LlmRequest) -> Result<Completion, (bool, String)> {
        let body = json!({
            "model": self.cfg.model,
            "messages": req.messages,
            "temperature": req.temperature,
        });
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut resp = self
            .agent
            .post(&self.url())
            .header("Authorization", &format!("Bearer {}", self.cfg.api_key))
            .send_json(&body)
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| (true, e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err((true, format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err((false, format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| (false, format!("bad JSON: {e}")))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or((false, "response has no choices[0].message.content".to_string()))?
            .to_string();
        let mut c = Completion::estimated(req, content);
        if let Some(p) = v["usage"]["prompt_tokens"].as_u64() {
            c.prompt_tokens = p;
        }
        if let Some(p) = v["usage"]["completion_tokens"].as_u64() {
            c.completion_tokens = p;
        }
        Ok(c)
    }
}

impl Transport for LiveTransport {
    fn complete(&self, req: &LlmRequest) -> Result<Completion, LlmError> {
        let _slot = self.slots.acquire();
        let mut last = String::new();
        for attempt in 0..self.cfg.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.cfg.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(req) {
                Ok(c) => return Ok(c),
                Err((retry, msg)) => {
                    log::warn!("chat completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(LlmError::Transport(last))
    }

    fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
