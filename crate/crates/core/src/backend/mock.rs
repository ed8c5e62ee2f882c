use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BackendError, BackendResponse, ChatBackend, ChatRequest, Usage};
use crate::domain::AgentRole;

/// Returns `response` when the request comes from `agent` (any agent if
/// unset) and its last user message contains `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentRole>,
    #[serde(default)]
    pub contains: String,
    pub response: String,
}

impl MockRule {
    pub fn new(agent: Option<AgentRole>, contains: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            agent,
            contains: contains.into(),
            response: response.into(),
        }
    }

    fn matches(&self, request: &ChatRequest) -> bool {
        self.agent.is_none_or(|a| a == request.agent)
            && request
                .last_user_message()
                .is_some_and(|m| m.contains(&self.contains))
    }
}

/// Ordered rules plus a fallback. First match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    #[serde(default = "default_fallback")]
    pub fallback: String,
}

fn default_fallback() -> String {
    "UNSPECIFIED".to_string()
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            fallback: default_fallback(),
        }
    }
}

impl MockScript {
    pub fn new(rules: Vec<MockRule>) -> Self {
        Self {
            rules,
            ..Self::default()
        }
    }

    pub fn with_fallback(mut self, fallback: impl Into<String>) -> Self {
        self.fallback = fallback.into();
        self
    }

    pub fn rule(mut self, agent: Option<AgentRole>, contains: &str, response: &str) -> Self {
        self.rules.push(MockRule::new(agent, contains, response));
        self
    }

    pub fn respond(&self, request: &ChatRequest) -> &str {
        self.rules
            .iter()
            .find(|r| r.matches(request))
            .map_or(self.fallback.as_str(), |r| r.response.as_str())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, std::io::Error> {
        let content = std::fs::read_to_string(path)?;
        serde_json::from_str(&content).map_err(std::io::Error::other)
    }
}

/// Scripted backend. Output is a pure function of the script and the
/// request; it also counts calls and keeps every request for inspection.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: MockScript,
    calls: AtomicUsize,
    captured: Mutex<Vec<ChatRequest>>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            calls: AtomicUsize::new(0),
            captured: Mutex::new(Vec::new()),
        }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn captured(&self) -> Vec<ChatRequest> {
        self.captured.lock().expect("mock capture lock").clone()
    }

    pub fn calls_for(&self, agent: AgentRole) -> usize {
        self.captured
            .lock()
            .expect("mock capture lock")
            .iter()
            .filter(|r| r.agent == agent)
            .count()
    }
}

/// Rough token estimate so usage totals are non-trivial in offline runs.
fn whitespace_tokens(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.captured
            .lock()
            .expect("mock capture lock")
            .push(request.clone());
        let text = self.script.respond(request).to_string();
        if text.trim().is_empty() {
            return Err(BackendError::Refusal("empty scripted response".into()));
        }
        let input_tokens = request
            .messages
            .iter()
            .map(|m| whitespace_tokens(&m.content))
            .sum();
        Ok(BackendResponse {
            usage: Usage {
                input_tokens,
                output_tokens: whitespace_tokens(&text),
            },
            text,
            latency_ms: 0,
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}
