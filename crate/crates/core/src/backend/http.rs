//! Chat-completions client for OpenAI-compatible vision endpoints.

use std::io::Read;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use rand::Rng;
use serde_json::{json, Value};

use super::{
    Backend, BackendError, EndpointConfig, QueryRequest, QueryResponse, SamplingParams, Usage, ENV_API_BASE,
    ENV_API_KEY,
};

/// Exponential backoff with jitter: attempt `k` waits a uniform fraction in
/// `[0.5, 1]` of `min(cap, base * 2^k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(500),
            cap: Duration::from_secs(30),
        }
    }
}

impl Backoff {
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.min(20));
        self.base.saturating_mul(factor).min(self.cap)
    }

    fn delay(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        if let Some(ra) = retry_after {
            return ra.min(self.cap);
        }
        self.ceiling(attempt).mul_f64(rand::rng().random_range(0.5..=1.0))
    }
}

/// Spaces requests evenly so that at most `rpm` start per minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_minute(rpm: u32) -> Option<Self> {
        (rpm > 0).then(|| Self {
            interval: Duration::from_secs(60) / rpm,
            next: Mutex::new(Instant::now()),
        })
    }

    /// Blocks until this caller's slot comes up.
    pub fn acquire(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

pub struct HttpBackend {
    model_id: String,
    sampling: SamplingParams,
    url: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Backoff,
    agent: ureq::Agent,
    limiter: Option<std::sync::Arc<RateLimiter>>,
}

enum Attempt {
    Done(Result<QueryResponse, BackendError>),
    Retry { reason: Retry, after: Option<Duration> },
}

enum Retry {
    RateLimited,
    Transport(String),
}

impl HttpBackend {
    pub fn new(
        model_id: &str,
        sampling: SamplingParams,
        endpoint: EndpointConfig,
        base_url: &str,
        api_key: Option<String>,
        limiter: Option<std::sync::Arc<RateLimiter>>,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            model_id: model_id.to_string(),
            sampling,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            max_retries: endpoint.max_retries,
            backoff: Backoff::default(),
            agent,
            limiter,
        }
    }

    /// Base URL from the endpoint config or `AGSR_API_BASE`; bearer token
    /// from `AGSR_API_KEY` when set.
    pub fn from_env(
        model_id: &str,
        sampling: SamplingParams,
        endpoint: EndpointConfig,
        limiter: Option<std::sync::Arc<RateLimiter>>,
    ) -> Result<Self, BackendError> {
        let base = endpoint
            .base_url
            .clone()
            .or_else(|| std::env::var(ENV_API_BASE).ok())
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| BackendError::Config(format!("no endpoint base_url and {ENV_API_BASE} is unset")))?;
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(Self::new(model_id, sampling, endpoint, &base, key, limiter))
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn request_body(&self, req: &QueryRequest) -> Result<Value, BackendError> {
        let mut content = vec![json!({ "type": "text", "text": req.prompt })];
        if !req.image_ref.is_empty() {
            content.push(json!({
                "type": "image_url",
                "image_url": { "url": image_url(&req.image_ref)? }
            }));
        }
        Ok(json!({
            "model": self.model_id,
            "temperature": self.sampling.temperature,
            "max_tokens": self.sampling.max_tokens,
            "messages": [{ "role": "user", "content": content }],
        }))
    }

    fn attempt(&self, body: &Value) -> Attempt {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let start = Instant::now();
        let mut call = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = match call.send_json(body) {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    reason: Retry::Transport(e.to_string()),
                    after: None,
                }
            }
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    reason: Retry::Transport(e.to_string()),
                    after: None,
                }
            }
        };
        let latency_ms = start.elapsed().as_millis() as u64;
        match status {
            200..=299 => Attempt::Done(self.decode(&text, latency_ms)),
            401 | 403 => Attempt::Done(Err(BackendError::Auth { status })),
            429 => Attempt::Retry {
                reason: Retry::RateLimited,
                after: retry_after,
            },
            500..=599 => Attempt::Retry {
                reason: Retry::Transport(format!("HTTP {status}")),
                after: retry_after,
            },
            _ => Attempt::Done(Err(BackendError::Rejected {
                status,
                message: text.chars().take(300).collect(),
            })),
        }
    }

    fn decode(&self, body: &str, latency_ms: u64) -> Result<QueryResponse, BackendError> {
        let v: Value =
            serde_json::from_str(body).map_err(|e| BackendError::MalformedUpstream(format!("body is not JSON: {e}")))?;
        let content = v
            .pointer("/choices/0/message/content")
            .ok_or_else(|| BackendError::MalformedUpstream("missing choices[0].message.content".into()))?;
        let text = match content {
            Value::String(s) => s.clone(),
            Value::Array(parts) => parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
            Value::Null => String::new(),
            _ => return Err(BackendError::MalformedUpstream("content is neither text nor parts".into())),
        };
        let usage = v.get("usage").and_then(|u| {
            Some(Usage {
                prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
                completion_tokens: u.get("completion_tokens")?.as_u64()?,
            })
        });
        Ok(QueryResponse {
            text,
            usage,
            latency_ms,
            model_id: self.model_id.clone(),
            cache_hit: false,
        })
    }
}

impl Backend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn sampling(&self) -> &SamplingParams {
        &self.sampling
    }

    fn query(&self, req: &QueryRequest) -> Result<QueryResponse, BackendError> {
        let body = self.request_body(req)?;
        let mut attempt = 0;
        loop {
            let (reason, after) = match self.attempt(&body) {
                Attempt::Done(r) => return r,
                Attempt::Retry { reason, after } => (reason, after),
            };
            if attempt >= self.max_retries {
                let attempts = attempt + 1;
                return Err(match reason {
                    Retry::RateLimited => BackendError::RateLimited { attempts },
                    Retry::Transport(message) => BackendError::Transport { attempts, message },
                });
            }
            log::debug!("{}: retrying after attempt {}", req.request_id, attempt + 1);
            thread::sleep(self.backoff.delay(attempt, after));
            attempt += 1;
        }
    }
}

fn mime_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

/// Remote and data URLs pass through; local files become base64 data URLs.
pub(crate) fn image_url(image_ref: &str) -> Result<String, BackendError> {
    let lower = image_ref.to_ascii_lowercase();
    if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("data:") {
        return Ok(image_ref.to_string());
    }
    let path = Path::new(image_ref.strip_prefix("file://").unwrap_or(image_ref));
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| BackendError::io(path, e))?;
    Ok(format!(
        "data:{};base64,{}",
        mime_for(path),
        base64::engine::general_purpose::STANDARD.encode(bytes)
    ))
}
