//! Content-addressed response cache: one JSON file per request.

use std::io::Write;
use std::path::{Path, PathBuf};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, BackendResponse, ChatBackend, ChatMessage, ChatRequest, Usage};
use crate::domain::AgentRole;

#[derive(Serialize)]
struct KeyMaterial<'a> {
    agent: AgentRole,
    model_id: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_output_tokens: u32,
    seed_hint: Option<u64>,
}

/// Hex SHA-256 over a canonical JSON encoding of every request field.
pub fn cache_key(request: &ChatRequest) -> String {
    let material = KeyMaterial {
        agent: request.agent,
        model_id: &request.params.model_id,
        messages: &request.messages,
        temperature: request.params.temperature,
        max_output_tokens: request.params.max_output_tokens,
        seed_hint: request.params.seed_hint,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub response_text: String,
    pub usage: Usage,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| BackendError::Cache {
            key: "-".into(),
            message: format!("cannot create {}: {e}", dir.display()),
        })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, BackendError> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(key, e)),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| cache_err(key, e))?;
        if entry.key != key {
            return Err(cache_err(key, format!("entry records key {}", entry.key)));
        }
        Ok(Some(entry))
    }

    /// Writes through a temp file and rename, so concurrent writers of the
    /// same key never leave a partial file behind.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), BackendError> {
        let key = &entry.key;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| cache_err(key, e))?;
        serde_json::to_writer(&mut tmp, entry).map_err(|e| cache_err(key, e))?;
        tmp.flush().map_err(|e| cache_err(key, e))?;
        tmp.persist(self.path_for(key))
            .map_err(|e| cache_err(key, e.error))?;
        Ok(())
    }
}

fn cache_err(key: &str, e: impl std::fmt::Display) -> BackendError {
    BackendError::Cache {
        key: key.to_string(),
        message: e.to_string(),
    }
}

/// Serves repeated requests from a [`ResponseCache`], delegating misses.
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: ChatBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        Self { inner, cache }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub async fn cached_complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError> {
        let key = cache_key(request);
        if let Some(entry) = self.cache.get(&key)? {
            return Ok(BackendResponse {
                text: entry.response_text,
                usage: entry.usage,
                latency_ms: 0,
            });
        }
        let response = self.inner.complete(request).await?;
        self.cache.put(&CacheEntry {
            key,
            response_text: response.text.clone(),
            usage: response.usage,
            created_at: Utc::now(),
        })?;
        Ok(response)
    }
}

#[async_trait]
impl<B: ChatBackend> ChatBackend for CachedBackend<B> {
    async fn complete(&self, request: &ChatRequest) -> Result<BackendResponse, BackendError> {
        self.cached_complete(request).await
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{GenerationParams, MockBackend, MockScript};
    use proptest::prelude::*;

    fn request(temperature: f64) -> ChatRequest {
        ChatRequest::new(
            AgentRole::Manager,
            vec![ChatMessage::system("s"), ChatMessage::user("probe")],
            GenerationParams::new("model-a", temperature, 64),
        )
    }

    fn cached(dir: &Path) -> CachedBackend<MockBackend> {
        CachedBackend::new(
            MockBackend::new(MockScript::default().rule(None, "probe", "pong")),
            ResponseCache::open(dir).unwrap(),
        )
    }

    #[tokio::test]
    async fn second_identical_call_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let backend = cached(dir.path());
        let a = backend.complete(&request(0.0)).await.unwrap();
        let b = backend.complete(&request(0.0)).await.unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(backend.inner().call_count(), 1);

        // survives a fresh handle on the same directory
        let again = cached(dir.path());
        again.complete(&request(0.0)).await.unwrap();
        assert_eq!(again.inner().call_count(), 0);
    }

    #[tokio::test]
    async fn temperature_change_is_a_different_entry() {
        let dir = tempfile::tempdir().unwrap();
        let backend = cached(dir.path());
        backend.complete(&request(0.0)).await.unwrap();
        backend.complete(&request(0.7)).await.unwrap();
        assert_eq!(backend.inner().call_count(), 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[tokio::test]
    async fn truncated_entry_is_a_cache_error_naming_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let backend = cached(dir.path());
        backend.complete(&request(0.0)).await.unwrap();
        let key = cache_key(&request(0.0));
        let path = backend.cache.path_for(&key);
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() / 2]).unwrap();

        let err = backend.complete(&request(0.0)).await.unwrap_err();
        match err {
            BackendError::Cache { key: k, .. } => assert_eq!(k, key),
            other => panic!("expected cache error, got {other}"),
        }
    }

    #[test]
    fn entry_file_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let entry = CacheEntry {
            key: "abc".into(),
            response_text: "hi".into(),
            usage: Usage::default(),
            created_at: Utc::now(),
        };
        cache.put(&entry).unwrap();
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(cache.path_for("abc")).unwrap()).unwrap();
        for field in ["key", "response_text", "usage", "created_at"] {
            assert!(v.get(field).is_some(), "{field}");
        }
        assert_eq!(cache.get("abc").unwrap(), Some(entry));
        assert_eq!(cache.get("missing").unwrap(), None);
    }

    fn arb_request() -> impl Strategy<Value = ChatRequest> {
        (
            prop::sample::select(AgentRole::ALL.to_vec()),
            "[a-c]{1,2}",
            prop::collection::vec("[a-c<>]{1,3}", 1..3),
            prop::sample::select(vec![0.0, 0.7, 1.0]),
            1u32..3,
            prop::option::of(0u64..2),
        )
            .prop_map(|(agent, model, users, t, max, seed)| {
                let mut params = GenerationParams::new(model, t, max);
                params.seed_hint = seed;
                ChatRequest::new(agent, users.into_iter().map(ChatMessage::user).collect(), params)
            })
    }

    proptest! {
        #[test]
        fn keys_collide_only_on_equal_requests(a in arb_request(), b in arb_request()) {
            prop_assert_eq!(cache_key(&a) == cache_key(&b), a == b);
        }
    }
}
