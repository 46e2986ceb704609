use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::ZeroShotError;
use crate::io::{read_jsonl, sha256_hex};

pub const ENV_ENDPOINT: &str = "ESG_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "ESG_LLM_MODEL";
pub const ENV_API_KEY: &str = "ESG_LLM_API_KEY";

/// One journaled request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub sentence_id: String,
    pub prompt_digest: String,
    pub response: String,
}

impl TranscriptEntry {
    pub fn new(sentence_id: impl Into<String>, prompt: &str, response: impl Into<String>) -> Self {
        Self {
            sentence_id: sentence_id.into(),
            prompt_digest: prompt_digest(prompt),
            response: response.into(),
        }
    }
}

pub fn prompt_digest(prompt: &str) -> String {
    sha256_hex(prompt.as_bytes())
}

/// Offline client answering from a recorded transcript.
#[derive(Debug, Default)]
pub struct ReplayClient {
    entries: HashMap<String, TranscriptEntry>,
    digest_mismatches: AtomicUsize,
}

impl ReplayClient {
    /// Later entries for the same sentence replace earlier ones.
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.sentence_id.clone(), e)).collect(),
            digest_mismatches: AtomicUsize::new(0),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ZeroShotError> {
        if !path.exists() {
            return Err(ZeroShotError::ClientMisconfigured(format!(
                "replay transcript {} does not exist",
                path.display()
            )));
        }
        Ok(Self::from_entries(read_jsonl::<TranscriptEntry>(path)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lookups whose recorded prompt differs from the one built now, which
    /// usually means the template changed since recording.
    pub fn digest_mismatches(&self) -> usize {
        self.digest_mismatches.load(Ordering::Relaxed)
    }

    fn complete(&self, sentence_id: &str, prompt: &str) -> Result<String, ZeroShotError> {
        let entry = self
            .entries
            .get(sentence_id)
            .ok_or_else(|| ZeroShotError::TranscriptMissingEntry(sentence_id.to_string()))?;
        if entry.prompt_digest != prompt_digest(prompt) {
            self.digest_mismatches.fetch_add(1, Ordering::Relaxed);
            warn!(sentence_id, "transcript prompt digest differs from the current prompt");
        }
        Ok(entry.response.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://host/v1`.
    pub endpoint: String,
    pub model: String,
    /// Environment only; never read from or written to config files.
    #[serde(skip)]
    pub api_key: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub requests_per_second: f64,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    /// Every successful exchange is appended here.
    pub transcript: Option<PathBuf>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key: String::new(),
            max_retries: 4,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
            requests_per_second: 2.0,
            max_in_flight: 4,
            timeout_secs: 60,
            transcript: None,
        }
    }
}

impl RemoteConfig {
    /// Defaults plus [`RemoteConfig::with_env`].
    pub fn from_env() -> Result<Self, ZeroShotError> {
        Self::default().with_env()
    }

    /// Take the API key from `ESG_LLM_API_KEY` (required) and let
    /// `ESG_LLM_ENDPOINT` / `ESG_LLM_MODEL` override the configured values.
    pub fn with_env(mut self) -> Result<Self, ZeroShotError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        if let Some(e) = var(ENV_ENDPOINT) {
            self.endpoint = e;
        }
        if let Some(m) = var(ENV_MODEL) {
            self.model = m;
        }
        self.api_key = var(ENV_API_KEY).ok_or_else(|| {
            ZeroShotError::ClientMisconfigured(format!("environment variable {ENV_API_KEY} is not set"))
        })?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ZeroShotError> {
        let bad = |m: &str| Err(ZeroShotError::ClientMisconfigured(m.to_string()));
        if self.endpoint.trim().is_empty() {
            return bad("remote endpoint is empty");
        }
        if self.model.trim().is_empty() {
            return bad("remote model is empty");
        }
        if self.api_key.trim().is_empty() {
            return bad("remote API key is empty");
        }
        if self.requests_per_second.is_nan() || self.requests_per_second <= 0.0 {
            return bad("requests_per_second must be positive");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (0-based): doubling, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64.checked_shl(attempt).unwrap_or(u64::MAX))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug)]
pub struct RemoteClient {
    config: RemoteConfig,
    http: reqwest::blocking::Client,
    next_slot: Mutex<Instant>,
    journal: Option<Mutex<File>>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self, ZeroShotError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ZeroShotError::ClientMisconfigured(e.to_string()))?;
        let journal = match &config.transcript {
            Some(p) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| ZeroShotError::ClientMisconfigured(format!("{}: {e}", p.display())))?,
            )),
            None => None,
        };
        Ok(Self {
            config,
            http,
            next_slot: Mutex::new(Instant::now()),
            journal,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn wait_for_slot(&self) {
        let interval = Duration::from_secs_f64(1.0 / self.config.requests_per_second);
        let wake = {
            let mut next = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot
        };
        let now = Instant::now();
        if wake > now {
            std::thread::sleep(wake - now);
        }
    }

    fn attempt(&self, prompt: &str) -> Attempt {
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let resp = match self
            .http
            .post(&url)
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !status.is_success() {
            return Attempt::Fatal(format!("HTTP {status}"));
        }
        match resp.json::<ChatResponse>() {
            Ok(r) => match r.choices.into_iter().next().and_then(|c| c.message.content) {
                Some(text) => Attempt::Done(text),
                None => Attempt::Fatal("response has no message content".into()),
            },
            Err(e) => Attempt::Fatal(format!("malformed response: {e}")),
        }
    }

    fn journal(&self, entry: &TranscriptEntry) -> Result<(), ZeroShotError> {
        if let Some(j) = &self.journal {
            let mut line = serde_json::to_string(entry).map_err(crate::io::IoError::Json)?;
            line.push('\n');
            let mut f = j.lock().expect("journal lock");
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| ZeroShotError::Transport(format!("journal write failed: {e}")))?;
        }
        Ok(())
    }

    /// `Err(Transport)` once retries are exhausted or on a non-retryable
    /// failure.
    fn complete(&self, sentence_id: &str, prompt: &str) -> Result<String, ZeroShotError> {
        let mut attempt = 0u32;
        loop {
            self.wait_for_slot();
            match self.attempt(prompt) {
                Attempt::Done(text) => {
                    self.journal(&TranscriptEntry::new(sentence_id, prompt, text.clone()))?;
                    return Ok(text);
                }
                Attempt::Fatal(msg) => return Err(ZeroShotError::Transport(msg)),
                Attempt::Retry(msg) if attempt >= self.config.max_retries => {
                    return Err(ZeroShotError::Transport(format!("{msg} after {} retries", attempt)));
                }
                Attempt::Retry(msg) => {
                    let delay = self.config.backoff(attempt);
                    debug!(sentence_id, attempt, ?delay, "retrying after {msg}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }
}

/// Where zero-shot answers come from.
#[derive(Debug)]
pub enum GenerativeClient {
    Replay(ReplayClient),
    Remote(RemoteClient),
}

impl GenerativeClient {
    pub fn replay(path: &Path) -> Result<Self, ZeroShotError> {
        ReplayClient::from_path(path).map(Self::Replay)
    }

    pub fn remote_from_env() -> Result<Self, ZeroShotError> {
        RemoteClient::new(RemoteConfig::from_env()?).map(Self::Remote)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Replay(_) => "replay",
            Self::Remote(_) => "remote_api",
        }
    }

    pub(crate) fn max_in_flight(&self) -> usize {
        match self {
            Self::Replay(_) => 1,
            Self::Remote(r) => r.config.max_in_flight,
        }
    }

    pub fn complete(&self, sentence_id: &str, prompt: &str) -> Result<String, ZeroShotError> {
        match self {
            Self::Replay(r) => r.complete(sentence_id, prompt),
            Self::Remote(r) => r.complete(sentence_id, prompt),
        }
    }
}
