//! LLM judge gateway: element extraction and entailment with strict reply
//! parsing, response caching, bounded concurrency, and an offline mock.

pub mod cache;
pub mod dispatch;
pub mod http;
pub mod mock;
pub mod templates;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use dispatch::{map_ordered, InFlightLimit};

pub const DEFAULT_ELEMENT_CAP: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Object,
    Event,
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aspect::Object => "object",
            Aspect::Event => "event",
        })
    }
}

impl FromStr for Aspect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "object" => Ok(Aspect::Object),
            "event" | "action" => Ok(Aspect::Event),
            other => Err(format!("unknown aspect `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    #[default]
    Mock,
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "http_chat" => Ok(BackendKind::HttpChat),
            "mock" => Ok(BackendKind::Mock),
            other => Err(format!("unknown judge backend `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeConfig {
    pub backend: BackendKind,
    pub base_url: Option<String>,
    pub model_name: String,
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub timeout_s: f64,
    pub retry_backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub element_cap: usize,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            base_url: None,
            model_name: mock::MOCK_MODEL_NAME.to_string(),
            api_key_env: "CAREVAL_JUDGE_API_KEY".to_string(),
            max_in_flight: 8,
            max_retries: 3,
            timeout_s: 60.0,
            retry_backoff_ms: 500,
            cache_dir: None,
            element_cap: DEFAULT_ELEMENT_CAP,
        }
    }
}

impl JudgeConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.max_in_flight == 0 {
            return Err(JudgeError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(JudgeError::Config("timeout_s must be positive".into()));
        }
        if self.element_cap == 0 {
            return Err(JudgeError::Config("element_cap must be at least 1".into()));
        }
        if self.model_name.is_empty() {
            return Err(JudgeError::Config("model_name must not be empty".into()));
        }
        if self.backend == BackendKind::HttpChat && self.base_url.is_none() {
            return Err(JudgeError::Config("http_chat backend needs base_url".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Element {
    pub text: String,
    pub aspect: Aspect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub elements: Vec<Element>,
    /// Set when the judge returned more elements than the cap.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub description_hash: String,
    pub element: Element,
    pub entailed: bool,
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum BackendError {
    /// Worth retrying: transport failure, rate limit, server error.
    #[error("{0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("judge config: {0}")]
    Config(String),
    #[error("judge backend failed after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },
    #[error("unparseable {template_id} reply after reprompt: {reply:?}")]
    Unparseable { template_id: String, reply: String },
    #[error("judge cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// A transport that takes a chat transcript and returns the reply text.
pub trait ChatTransport: Send + Sync {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

impl ChatTransport for http::HttpChat {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        http::HttpChat::send(self, messages)
    }
}

enum Request<'a> {
    Extract { caption: &'a str, aspect: Aspect },
    Entail { description: &'a str, element: &'a str },
}

enum Backend {
    Mock,
    Chat(Box<dyn ChatTransport>),
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeStats {
    pub requests: usize,
    pub cache_hits: usize,
    pub retries: usize,
    pub reprompts: usize,
}

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    cache_hits: AtomicUsize,
    retries: AtomicUsize,
    reprompts: AtomicUsize,
}

pub struct Judge {
    cfg: JudgeConfig,
    backend: Backend,
    cache: Option<ResponseCache>,
    limit: InFlightLimit,
    counters: Counters,
}

pub fn description_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Judge {
    pub fn new(cfg: JudgeConfig) -> Result<Self, JudgeError> {
        cfg.validate()?;
        let backend = match cfg.backend {
            BackendKind::Mock => Backend::Mock,
            BackendKind::HttpChat => {
                let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
                let chat = http::HttpChat::new(
                    cfg.base_url.as_deref().unwrap_or_default(),
                    &cfg.model_name,
                    api_key,
                    Duration::from_secs_f64(cfg.timeout_s),
                )
                .map_err(|e| JudgeError::Config(e.to_string()))?;
                Backend::Chat(Box::new(chat))
            }
        };
        Self::build(cfg, backend)
    }

    /// A judge over a caller-supplied transport; `cfg.backend` is ignored.
    pub fn with_transport(
        cfg: JudgeConfig,
        transport: Box<dyn ChatTransport>,
    ) -> Result<Self, JudgeError> {
        cfg.validate().or_else(|e| match e {
            JudgeError::Config(m) if m.contains("base_url") => Ok(()),
            e => Err(e),
        })?;
        Self::build(cfg, Backend::Chat(transport))
    }

    fn build(cfg: JudgeConfig, backend: Backend) -> Result<Self, JudgeError> {
        let cache = cfg.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
        Ok(Self {
            limit: InFlightLimit::new(cfg.max_in_flight),
            cfg,
            backend,
            cache,
            counters: Counters::default(),
        })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    pub fn model_name(&self) -> &str {
        &self.cfg.model_name
    }

    pub fn stats(&self) -> JudgeStats {
        JudgeStats {
            requests: self.counters.requests.load(Ordering::SeqCst),
            cache_hits: self.counters.cache_hits.load(Ordering::SeqCst),
            retries: self.counters.retries.load(Ordering::SeqCst),
            reprompts: self.counters.reprompts.load(Ordering::SeqCst),
        }
    }

    /// Highest number of simultaneously outstanding backend requests.
    pub fn in_flight_peak(&self) -> usize {
        self.limit.peak()
    }

    pub fn extract_elements(&self, caption: &str, aspect: Aspect) -> Result<Extraction, JudgeError> {
        if caption.trim().is_empty() {
            return Err(JudgeError::EmptyInput("caption"));
        }
        let (template_id, prompt) = templates::render_extraction(aspect, caption);
        let (mut items, _) = self.call(
            Request::Extract { caption, aspect },
            template_id,
            &prompt,
            templates::parse_extraction,
            templates::REPROMPT_EXTRACT,
        )?;
        let truncated = items.len() > self.cfg.element_cap;
        items.truncate(self.cfg.element_cap);
        Ok(Extraction {
            elements: items
                .into_iter()
                .map(|text| Element { text, aspect })
                .collect(),
            truncated,
        })
    }

    pub fn judge_entailment(
        &self,
        description: &str,
        element: &Element,
    ) -> Result<JudgeVerdict, JudgeError> {
        if description.trim().is_empty() {
            return Err(JudgeError::EmptyInput("description"));
        }
        if element.text.trim().is_empty() {
            return Err(JudgeError::EmptyInput("element"));
        }
        let (template_id, prompt) = templates::render_entailment(description, &element.text);
        let (entailed, raw_response) = self.call(
            Request::Entail {
                description,
                element: &element.text,
            },
            template_id,
            &prompt,
            templates::parse_entailment,
            templates::REPROMPT_ENTAIL,
        )?;
        Ok(JudgeVerdict {
            description_hash: description_hash(description),
            element: element.clone(),
            entailed,
            raw_response,
        })
    }

    fn call<T>(
        &self,
        request: Request<'_>,
        template_id: &str,
        prompt: &str,
        parse: fn(&str) -> Option<T>,
        reprompt: &str,
    ) -> Result<(T, String), JudgeError> {
        let key = cache_key(&self.cfg.model_name, template_id, prompt);
        if let Some(entry) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            if let Some(parsed) = parse(&entry.response) {
                self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok((parsed, entry.response));
            }
        }

        let mut messages = vec![ChatMessage::new("user", prompt)];
        let mut reply = self.complete(&request, &messages)?;
        let parsed = match parse(&reply) {
            Some(p) => p,
            None => {
                self.counters.reprompts.fetch_add(1, Ordering::SeqCst);
                messages.push(ChatMessage::new("assistant", reply));
                messages.push(ChatMessage::new("user", reprompt));
                reply = self.complete(&request, &messages)?;
                parse(&reply).ok_or_else(|| JudgeError::Unparseable {
                    template_id: template_id.to_string(),
                    reply: reply.clone(),
                })?
            }
        };

        if let Some(cache) = &self.cache {
            cache.put(&CacheEntry {
                key,
                model_name: self.cfg.model_name.clone(),
                template_id: template_id.to_string(),
                prompt: prompt.to_string(),
                response: reply.clone(),
            })?;
        }
        Ok((parsed, reply))
    }

    fn complete(&self, request: &Request<'_>, messages: &[ChatMessage]) -> Result<String, JudgeError> {
        let transport = match &self.backend {
            Backend::Mock => {
                self.counters.requests.fetch_add(1, Ordering::SeqCst);
                return Ok(match request {
                    Request::Extract { caption, aspect } => {
                        templates::format_extraction(&mock::extract(caption, *aspect))
                    }
                    Request::Entail {
                        description,
                        element,
                    } => templates::format_entailment(mock::entails(description, element)).to_string(),
                });
            }
            Backend::Chat(t) => t,
        };

        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                self.counters.retries.fetch_add(1, Ordering::SeqCst);
                let backoff = self.cfg.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let result = {
                let _permit = self.limit.acquire();
                self.counters.requests.fetch_add(1, Ordering::SeqCst);
                transport.send(messages)
            };
            match result {
                Ok(text) => return Ok(text),
                Err(BackendError::Transient(m)) => last = m,
                Err(BackendError::Fatal(m)) => {
                    return Err(JudgeError::Backend {
                        attempts: attempt + 1,
                        message: m,
                    })
                }
            }
        }
        Err(JudgeError::Backend {
            attempts,
            message: last,
        })
    }
}
