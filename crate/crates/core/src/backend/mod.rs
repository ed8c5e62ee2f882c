//! Chat-completion backends every agent runs over.

mod cache;
mod live;
mod mock;
mod rate_limit;
mod retry;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::domain::AgentRole;

pub use cache::{cache_key, CacheEntry, CachedBackend, ResponseCache};
pub use live::{LiveBackend, LiveConfig, DEFAULT_API_KEY_ENV};
pub use mock::{MockBackend, MockRule, MockScript};
pub use rate_limit::{RateLimiter, SlidingWindow};
pub use retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hint: Option<u64>,
}

impl GenerationParams {
    pub fn new(model_id: impl Into<String>, temperature: f64, max_output_tokens: u32) -> Self {
        Self {
            model_id: model_id.into(),
            temperature,
            max_output_tokens,
            seed_hint: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if self.model_id.trim().is_empty() {
            return Err(BackendError::InvalidRequest("empty model id".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

/// Everything one agent call sends to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub agent: AgentRole,
    pub messages: Vec<ChatMessage>,
    pub params: GenerationParams,
}

impl ChatRequest {
    pub fn new(agent: AgentRole, messages: Vec<ChatMessage>, params: GenerationParams) -> Self {
        Self {
            agent,
            messages,
            params,
        }
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if self.messages.iter().any(|m| m.content.is_empty()) {
            return Err(BackendError::InvalidRequest("empty message content".into()));
        }
        self.params.validate()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("model refused or returned no content: {0}")]
    Refusal(String),
    #[error("cache entry {key}: {message}")]
    Cache { key: String, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    /// Errors that no per-instance retry can fix and that should stop a run.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth(_))
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError>;

    fn name(&self) -> &str;
}

#[async_trait]
impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    async fn complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request).await
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

#[async_trait]
impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    async fn complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request).await
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
