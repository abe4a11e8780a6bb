//! Prompt rendering, chat transports (live, replay, recording, synthetic) and
//! response parsing.

mod parse;
mod synthetic;
mod templates;
mod transport;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use parse::{parse_response, MalformedResponse, ParsedResponse};
pub use synthetic::SyntheticTransport;
pub use templates::{format_score, render_prompt, ArityError, Message, Parent, PromptContext, Role};
pub use transport::{
    estimate_tokens, Completion, LiveConfig, LiveTransport, LlmRequest, RecordingTransport, ReplayTransport,
    TranscriptRecord, Transport,
};

use crate::strategy::PromptStrategy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("credential variable {0} is not set")]
    Credential(String),
    #[error("transcript I/O: {0}")]
    Io(String),
    #[error(transparent)]
    Arity(#[from] ArityError),
    #[error("malformed response: {0}")]
    Malformed(#[from] MalformedResponse),
}

impl LlmError {
    /// Errors that end a run rather than forfeit one generation slot.
    pub fn is_fatal(&self) -> bool {
        matches!(self, LlmError::ReplayMiss { .. } | LlmError::Credential(_) | LlmError::Io(_))
    }
}

fn canonical(text: &str) -> String {
    text.trim().lines().map(str::trim_end).collect::<Vec<_>>().join("\n")
}

/// Stable hex digest of (strategy, messages, temperature). Trailing
/// whitespace on lines and around messages does not affect it.
pub fn request_digest(strategy: PromptStrategy, messages: &[Message], temperature: f64) -> String {
    let mut h = Sha256::new();
    h.update(strategy.tag().as_bytes());
    for m in messages {
        h.update([0u8]);
        h.update(serde_json::to_string(&m.role).unwrap_or_default().as_bytes());
        h.update([0u8]);
        h.update(canonical(&m.content).as_bytes());
    }
    h.update([0u8]);
    h.update(format!("{temperature:?}").as_bytes());
    hex::encode(h.finalize())
}

/// Token totals reported by the gateway.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TokenCounts {
    pub prompt: u64,
    pub completion: u64,
    pub requests: u64,
}

impl TokenCounts {
    pub fn total(&self) -> u64 {
        self.prompt + self.completion
    }
}

/// Thread-safe front end over a transport. Tracks per-island occurrence
/// counters so that repeated identical prompts map to distinct recordings.
pub struct Gateway {
    transport: Box<dyn Transport>,
    temperature: f64,
    occurrences: Mutex<BTreeMap<String, u64>>,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
    requests: AtomicU64,
}

impl Gateway {
    pub fn new(transport: Box<dyn Transport>, temperature: f64) -> Self {
        Gateway {
            transport,
            temperature,
            occurrences: Mutex::new(BTreeMap::new()),
            prompt_tokens: AtomicU64::new(0),
            completion_tokens: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn network_calls(&self) -> u64 {
        self.transport.network_calls()
    }

    pub fn tokens(&self) -> TokenCounts {
        TokenCounts {
            prompt: self.prompt_tokens.load(Ordering::Relaxed),
            completion: self.completion_tokens.load(Ordering::Relaxed),
            requests: self.requests.load(Ordering::Relaxed),
        }
    }

    /// Occurrence counters keyed `"<island>:<digest>"`, for checkpoints.
    pub fn occurrences(&self) -> BTreeMap<String, u64> {
        self.occurrences.lock().unwrap().clone()
    }

    pub fn restore(&self, occurrences: BTreeMap<String, u64>, tokens: TokenCounts) {
        *self.occurrences.lock().unwrap() = occurrences;
        self.prompt_tokens.store(tokens.prompt, Ordering::Relaxed);
        self.completion_tokens.store(tokens.completion, Ordering::Relaxed);
        self.requests.store(tokens.requests, Ordering::Relaxed);
    }

    pub fn complete(&self, strategy: PromptStrategy, island: usize, messages: Vec<Message>) -> Result<Completion, LlmError> {
        let digest = request_digest(strategy, &messages, self.temperature);
        let occurrence = {
            let mut occ = self.occurrences.lock().unwrap();
            let slot = occ.entry(format!("{island}:{digest}")).or_insert(0);
            let k = *slot;
            *slot += 1;
            k
        };
        let req = LlmRequest { strategy, island, messages, temperature: self.temperature, digest, occurrence };
        let c = self.transport.complete(&req)?;
        self.prompt_tokens.fetch_add(c.prompt_tokens, Ordering::Relaxed);
        self.completion_tokens.fetch_add(c.completion_tokens, Ordering::Relaxed);
        self.requests.fetch_add(1, Ordering::Relaxed);
        Ok(c)
    }

    /// Renders, completes and parses a generation or reset prompt.
    pub fn generate(
        &self,
        strategy: PromptStrategy,
        island: usize,
        ctx: &PromptContext,
    ) -> Result<(ParsedResponse, Completion), LlmError> {
        let messages = render_prompt(strategy, ctx)?;
        let c = self.complete(strategy, island, messages)?;
        let parsed = parse_response(&c.text)?;
        Ok((parsed, c))
    }

    /// Renders and completes an insight prompt; returns the trimmed text.
    pub fn insight(&self, island: usize, ctx: &PromptContext) -> Result<(String, Completion), LlmError> {
        let messages = render_prompt(PromptStrategy::Insight, ctx)?;
        let c = self.complete(PromptStrategy::Insight, island, messages)?;
        Ok((c.text.trim().to_string(), c))
    }
}
