//! HTTP backend for OpenAI-compatible chat-completion endpoints (including
//! Gemini's compatibility endpoint).

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::rate_limit::RateLimiter;
use super::retry::{AttemptError, RetryPolicy};
use super::{BackendError, BackendResponse, ChatBackend, ChatMessage, ChatRequest, Usage};

pub const DEFAULT_API_KEY_ENV: &str = "MADACC_API_KEY";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint_url: String,
    pub api_key_env: String,
    pub request_timeout: Duration,
    pub retry: RetryPolicy,
    /// Requests per minute; `None` disables limiting.
    pub rate_limit_rpm: Option<usize>,
}

impl LiveConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            request_timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            rate_limit_rpm: None,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    message: Option<WireMessage>,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default, alias = "input_tokens")]
    prompt_tokens: Option<u64>,
    #[serde(default, alias = "output_tokens")]
    completion_tokens: Option<u64>,
}

pub struct LiveBackend {
    client: reqwest::Client,
    config: LiveConfig,
    api_key: String,
    limiter: Option<Arc<RateLimiter>>,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend")
            .field("endpoint_url", &self.config.endpoint_url)
            .finish_non_exhaustive()
    }
}

impl LiveBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: LiveConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env).unwrap_or_default();
        if key.trim().is_empty() {
            return Err(BackendError::Auth(format!(
                "environment variable {} is not set",
                config.api_key_env
            )));
        }
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: LiveConfig, api_key: impl Into<String>) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| BackendError::InvalidRequest(format!("http client: {e}")))?;
        let limiter = config
            .rate_limit_rpm
            .filter(|r| *r > 0)
            .map(|r| Arc::new(RateLimiter::per_minute(r)));
        Ok(Self {
            client,
            config,
            api_key: api_key.into(),
            limiter,
        })
    }

    async fn attempt(&self, body: &WireRequest<'_>) -> Result<BackendResponse, AttemptError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire().await;
        }
        let started = Instant::now();
        let response = self
            .client
            .post(&self.config.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await
            .map_err(|e| AttemptError::Transient(e.to_string()))?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            let text = response.text().await.unwrap_or_default();
            return Err(AttemptError::Permanent(BackendError::Auth(format!("HTTP {status}: {text}"))));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptError::Transient(format!("HTTP {status}")));
        }
        let bytes = response
            .bytes()
            .await
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(AttemptError::Permanent(BackendError::Transport {
                attempts: 1,
                message: format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes)),
            }));
        }
        let wire: WireResponse = serde_json::from_slice(&bytes).map_err(|e| {
            AttemptError::Permanent(BackendError::Transport {
                attempts: 1,
                message: format!("unreadable response body: {e}"),
            })
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let usage = wire.usage.unwrap_or_default();
        let usage = Usage {
            input_tokens: usage.prompt_tokens.unwrap_or(0),
            output_tokens: usage.completion_tokens.unwrap_or(0),
        };
        let choice = wire.choices.into_iter().next();
        let finish = choice.as_ref().and_then(|c| c.finish_reason.clone());
        let text = choice
            .and_then(|c| c.message)
            .and_then(|m| m.content)
            .unwrap_or_default();
        if text.trim().is_empty() {
            return Err(AttemptError::Permanent(BackendError::Refusal(format!(
                "empty completion (finish_reason: {})",
                finish.as_deref().unwrap_or("none")
            ))));
        }
        Ok(BackendResponse {
            text,
            usage,
            latency_ms,
        })
    }
}

#[async_trait]
impl ChatBackend for LiveBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError> {
        request.validate()?;
        let body = WireRequest {
            model: &request.params.model_id,
            messages: &request.messages,
            temperature: request.params.temperature,
            max_tokens: request.params.max_output_tokens,
            seed: request.params.seed_hint,
        };
        self.config.retry.run(|_| self.attempt(&body)).await
    }

    fn name(&self) -> &str {
        "live"
    }
}
