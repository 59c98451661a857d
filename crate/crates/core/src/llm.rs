//! Chat-completion gateway: live HTTP backend, NDJSON replay cache, bounded
//! concurrency and retries on transient failures.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const ENV_API_BASE: &str = "ACTSQL_API_BASE";
pub const ENV_API_KEY: &str = "ACTSQL_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl GenerationParams {
    pub const PLAIN_MAX_TOKENS: u32 = 150;
    pub const COT_MAX_TOKENS: u32 = 750;

    pub fn plain() -> Self {
        GenerationParams { model: DEFAULT_MODEL.into(), temperature: 0.0, max_tokens: Self::PLAIN_MAX_TOKENS }
    }

    pub fn cot() -> Self {
        GenerationParams { max_tokens: Self::COT_MAX_TOKENS, ..Self::plain() }
    }
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self::plain()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmReply {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<(u64, u64)>,
}

impl LlmReply {
    pub fn stop(content: impl Into<String>) -> Self {
        LlmReply { content: content.into(), finish_reason: FinishReason::Stop, usage: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("replay cache miss for key {key}")]
    CacheMiss { key: String },
    #[error("request timed out")]
    Timeout,
    #[error("cache file {path}: {detail}")]
    Cache { path: PathBuf, detail: String },
    #[error("live backend required for mode {0} but none configured")]
    NoBackend(CacheMode),
}

/// Failure reported by a backend; only `RateLimited` and `Timeout` are retried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    RateLimited(String),
    Timeout,
    Fatal(String),
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &GenerationParams) -> Result<LlmReply, BackendError>;
}

/// Hex SHA-256 over a canonical JSON encoding of model, temperature,
/// max_tokens and the ordered role/content pairs.
pub fn request_key(messages: &[ChatMessage], params: &GenerationParams) -> String {
    let pairs: Vec<[&str; 2]> = messages.iter().map(|m| [m.role.as_str(), m.content.as_str()]).collect();
    let doc = serde_json::json!({
        "max_tokens": params.max_tokens,
        "messages": pairs,
        "model": params.model,
        "temperature": params.temperature,
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheMode {
    Live,
    Record,
    ReplayStrict,
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheMode::Live => "live",
            CacheMode::Record => "record",
            CacheMode::ReplayStrict => "replay-strict",
        })
    }
}

impl FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(CacheMode::Live),
            "record" => Ok(CacheMode::Record),
            "replay-strict" => Ok(CacheMode::ReplayStrict),
            other => Err(format!("unknown cache mode {other:?} (expected live, record or replay-strict)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model: String,
    pub params: GenerationParams,
    pub messages: Vec<ChatMessage>,
    pub reply: LlmReply,
    pub timestamp: u64,
}

/// Append-only NDJSON cache; on load the last record for a key wins.
pub struct ReplayCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, LlmReply>>,
    writer: Mutex<Option<File>>,
}

impl ReplayCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let err = |detail: String| LlmError::Cache { path: path.clone(), detail };
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| err(e.to_string()))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", n + 1)))?;
                entries.insert(rec.key, rec.reply);
            }
        }
        Ok(ReplayCache { path, entries: RwLock::new(entries), writer: Mutex::new(None) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<LlmReply> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, record: CacheRecord) -> Result<(), LlmError> {
        let err = |detail: String| LlmError::Cache { path: self.path.clone(), detail };
        let line = serde_json::to_string(&record).map_err(|e| err(e.to_string()))?;
        let mut guard = self.writer.lock().expect("cache writer lock");
        if guard.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
            }
            *guard = Some(OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| err(e.to_string()))?);
        }
        let file = guard.as_mut().expect("writer opened");
        writeln!(file, "{line}").and_then(|_| file.flush()).map_err(|e| err(e.to_string()))?;
        self.entries.write().expect("cache lock").insert(record.key, record.reply);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 5, base: Duration::from_secs(1), cap: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    /// Exponential delay before retry number `attempt` (0-based), with ±50% jitter.
    pub fn delay(&self, attempt: u32) -> Duration {
        let raw = self.base.saturating_mul(1u32 << attempt.min(16)).min(self.cap);
        raw.mul_f64(rand::rng().random_range(0.5..1.5))
    }
}

struct Semaphore {
    count: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { count: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut c = self.count.lock().expect("semaphore lock");
        while *c == 0 {
            c = self.cv.wait(c).expect("semaphore lock");
        }
        *c -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Shareable across threads; at most `max_inflight` backend calls run at once.
pub struct Gateway {
    mode: CacheMode,
    backend: Option<Arc<dyn ChatBackend>>,
    cache: Option<ReplayCache>,
    retry: RetryPolicy,
    permits: Semaphore,
}

impl Gateway {
    pub fn new(
        mode: CacheMode,
        backend: Option<Arc<dyn ChatBackend>>,
        cache: Option<ReplayCache>,
        max_inflight: usize,
    ) -> Result<Self, LlmError> {
        if mode != CacheMode::Live && cache.is_none() {
            return Err(LlmError::InvalidRequest(format!("mode {mode} needs a cache file")));
        }
        if mode != CacheMode::ReplayStrict && backend.is_none() {
            return Err(LlmError::NoBackend(mode));
        }
        Ok(Gateway { mode, backend, cache, retry: RetryPolicy::default(), permits: Semaphore::new(max_inflight) })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn complete_chat(&self, messages: &[ChatMessage], params: &GenerationParams) -> Result<LlmReply, LlmError> {
        validate(messages, params)?;
        let key = request_key(messages, params);
        if let Some(cache) = &self.cache {
            if self.mode != CacheMode::Live {
                if let Some(hit) = cache.get(&key) {
                    return Ok(hit);
                }
            }
        }
        if self.mode == CacheMode::ReplayStrict {
            return Err(LlmError::CacheMiss { key });
        }
        let reply = self.call_live(messages, params)?;
        if self.mode == CacheMode::Record {
            let cache = self.cache.as_ref().expect("record mode has a cache");
            let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            cache.append(CacheRecord {
                key,
                model: params.model.clone(),
                params: params.clone(),
                messages: messages.to_vec(),
                reply: reply.clone(),
                timestamp,
            })?;
        }
        Ok(reply)
    }

    fn call_live(&self, messages: &[ChatMessage], params: &GenerationParams) -> Result<LlmReply, LlmError> {
        let backend = self.backend.as_ref().ok_or(LlmError::NoBackend(self.mode))?;
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.permits.acquire();
                backend.complete(messages, params)
            };
            match result {
                Ok(r) => return Ok(r),
                Err(BackendError::Fatal(m)) => return Err(LlmError::Provider(m)),
                Err(e) => {
                    attempt += 1;
                    if attempt >= self.retry.attempts {
                        return Err(match e {
                            BackendError::Timeout => LlmError::Timeout,
                            BackendError::RateLimited(m) => LlmError::Provider(format!("rate limited after {attempt} attempts: {m}")),
                            BackendError::Fatal(m) => LlmError::Provider(m),
                        });
                    }
                    std::thread::sleep(self.retry.delay(attempt - 1));
                }
            }
        }
    }
}

fn validate(messages: &[ChatMessage], params: &GenerationParams) -> Result<(), LlmError> {
    if messages.is_empty() {
        return Err(LlmError::InvalidRequest("no messages".into()));
    }
    if messages[0].role != Role::System {
        return Err(LlmError::InvalidRequest("first message must be the system instruction".into()));
    }
    if let Some(i) = messages.iter().position(|m| m.content.is_empty()) {
        return Err(LlmError::InvalidRequest(format!("message {i} has empty content")));
    }
    if params.temperature.is_nan() || params.temperature < 0.0 || params.max_tokens == 0 {
        return Err(LlmError::InvalidRequest("temperature must be >= 0 and max_tokens positive".into()));
    }
    Ok(())
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(api_base: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| LlmError::Provider(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", api_base.trim_end_matches('/'));
        Ok(HttpBackend { endpoint, api_key, client })
    }

    /// Reads `ACTSQL_API_BASE` and `ACTSQL_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let base = std::env::var(ENV_API_BASE).map_err(|_| LlmError::InvalidRequest(format!("{ENV_API_BASE} is not set")))?;
        Self::new(&base, std::env::var(ENV_API_KEY).ok(), Duration::from_secs(120))
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
    usage: Option<CompletionUsage>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct CompletionUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage], params: &GenerationParams) -> Result<LlmReply, BackendError> {
        let body = serde_json::json!({
            "model": params.model,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "messages": messages,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| if e.is_timeout() { BackendError::Timeout } else { BackendError::Fatal(e.to_string()) })?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited(status.to_string()));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Fatal(format!("HTTP {status}: {text}")));
        }
        let parsed: CompletionResponse =
            resp.json().map_err(|e| if e.is_timeout() { BackendError::Timeout } else { BackendError::Fatal(e.to_string()) })?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        Ok(LlmReply {
            content: choice.message.content.unwrap_or_default(),
            finish_reason,
            usage: parsed.usage.map(|u| (u.prompt_tokens, u.completion_tokens)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs() -> Vec<ChatMessage> {
        vec![ChatMessage::system("s"), ChatMessage::user("q")]
    }

    #[test]
    fn key_is_order_sensitive() {
        let p = GenerationParams::plain();
        let a = msgs();
        let b = vec![ChatMessage::user("s"), ChatMessage::system("q")];
        assert_eq!(request_key(&a, &p), request_key(&msgs(), &p));
        assert_ne!(request_key(&a, &p), request_key(&b, &p));
        assert_eq!(request_key(&a, &p).len(), 64);
    }

    #[test]
    fn strict_replay_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::open(dir.path().join("c.ndjson")).unwrap();
        let gw = Gateway::new(CacheMode::ReplayStrict, None, Some(cache), 1).unwrap();
        let key = request_key(&msgs(), &GenerationParams::plain());
        match gw.complete_chat(&msgs(), &GenerationParams::plain()) {
            Err(LlmError::CacheMiss { key: k }) => assert_eq!(k, key),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_empty_content() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::open(dir.path().join("c.ndjson")).unwrap();
        let gw = Gateway::new(CacheMode::ReplayStrict, None, Some(cache), 1).unwrap();
        let m = vec![ChatMessage::system("s"), ChatMessage::user("")];
        assert!(matches!(gw.complete_chat(&m, &GenerationParams::plain()), Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [CacheMode::Live, CacheMode::Record, CacheMode::ReplayStrict] {
            assert_eq!(m.to_string().parse::<CacheMode>().unwrap(), m);
        }
    }
}
