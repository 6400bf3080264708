//! Generation, translation, embedding and image backends behind one cached
//! client.
//!
//! HTTP backends speak OpenAI-compatible JSON:
//!
//! | kind            | route                    | response field                     |
//! |-----------------|--------------------------|------------------------------------|
//! | `chat`          | `POST /chat/completions` | `choices[0].message.content`       |
//! | `image_to_text` | `POST /chat/completions` | `choices[0].message.content`       |
//! | `embed`         | `POST /embeddings`       | `data[0].embedding`                |
//! | `text_to_image` | `POST /images/generations` | `data[0].b64_json` (PNG)         |
//! | `translate`     | `POST /translations`     | `translation`                      |
//!
//! Translation requests carry `model`, `text`, `source_language` and
//! `target_language`. Image-to-text requests send the image as a
//! `data:image/png;base64,...` URL content part next to the text prompt.
//!
//! Endpoints with the `mock` scheme (for example `mock://local`) never touch
//! the network; see [`mock`].

pub mod cache;
pub mod http;
pub mod mock;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use base64::Engine;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{cache_key, CachedResponse, GenerationRecord, ProviderSummary, ResponseCache};
pub use http::{DisabledTransport, HttpTransport, RetryPolicy, Transport, TransportFailure};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("unexpected response shape: {0}")]
    Protocol(String),
    #[error("provider configured as {actual} cannot serve a {expected} request")]
    WrongKind { expected: ProviderKind, actual: ProviderKind },
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredential(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("embedding has dimension {got}, provider declares {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("offline: no cached response for {kind} request {key}")]
    Offline { kind: ProviderKind, key: String },
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Chat,
    Translate,
    Embed,
    TextToImage,
    ImageToText,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 5] = [
        ProviderKind::Chat,
        ProviderKind::Translate,
        ProviderKind::Embed,
        ProviderKind::TextToImage,
        ProviderKind::ImageToText,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderKind::Chat => "chat",
            ProviderKind::Translate => "translate",
            ProviderKind::Embed => "embed",
            ProviderKind::TextToImage => "text_to_image",
            ProviderKind::ImageToText => "image_to_text",
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ProviderKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown provider kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { temperature: 0.0, max_tokens: 1024, seed: Some(0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
    pub params: GenerationParams,
    /// Name of the environment variable holding the API key, if any.
    pub credential_env: Option<String>,
    /// Declared embedding dimension (embed providers only).
    pub dimension: Option<usize>,
}

impl ProviderConfig {
    pub fn mock(kind: ProviderKind) -> Self {
        ProviderConfig {
            kind,
            endpoint: "mock://local".into(),
            model: format!("mock-{kind}"),
            params: GenerationParams::default(),
            credential_env: None,
            dimension: (kind == ProviderKind::Embed).then_some(mock::DEFAULT_EMBED_DIM),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint.starts_with("mock:")
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let url = url::Url::parse(&self.endpoint)
            .map_err(|e| ProviderError::Config(format!("endpoint {:?}: {e}", self.endpoint)))?;
        if !matches!(url.scheme(), "http" | "https" | "mock") {
            return Err(ProviderError::Config(format!("unsupported endpoint scheme {:?}", url.scheme())));
        }
        if !(self.params.temperature >= 0.0) {
            return Err(ProviderError::Config(format!("temperature must be >= 0 (got {})", self.params.temperature)));
        }
        if self.dimension == Some(0) {
            return Err(ProviderError::Config("embedding dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn summary(&self) -> ProviderSummary {
        ProviderSummary { kind: self.kind, endpoint: self.endpoint.clone(), model: self.model.clone() }
    }

    fn mock_seed(&self) -> u64 {
        self.params.seed.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::Protocol("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Protocol("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Anything that can turn text into an embedding.
pub trait TextEmbedder: Sync {
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

/// A value together with the cache key that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyed<T> {
    pub value: T,
    pub cache_key: String,
}

#[derive(Debug, Default)]
pub struct CallStats {
    pub cache_hits: AtomicUsize,
    pub backend_calls: AtomicUsize,
}

/// Cached client for one configured backend.
pub struct Provider {
    cfg: ProviderConfig,
    cache: Arc<ResponseCache>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    stats: CallStats,
}

impl fmt::Debug for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Provider").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Provider {
    pub fn new(cfg: ProviderConfig, cache: Arc<ResponseCache>, transport: Arc<dyn Transport>) -> Result<Self, ProviderError> {
        cfg.validate()?;
        Ok(Provider { cfg, cache, transport, retry: RetryPolicy::default(), stats: CallStats::default() })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn cache_hits(&self) -> usize {
        self.stats.cache_hits.load(Ordering::Relaxed)
    }

    pub fn backend_calls(&self) -> usize {
        self.stats.backend_calls.load(Ordering::Relaxed)
    }

    fn require(&self, kind: ProviderKind) -> Result<(), ProviderError> {
        if self.cfg.kind != kind {
            return Err(ProviderError::WrongKind { expected: kind, actual: self.cfg.kind });
        }
        Ok(())
    }

    fn canonical(&self, payload: Value) -> Value {
        json!({
            "kind": self.cfg.kind,
            "endpoint": self.cfg.endpoint,
            "model": self.cfg.model,
            "payload": payload,
        })
    }

    fn bearer(&self) -> Result<Option<String>, ProviderError> {
        match &self.cfg.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| ProviderError::MissingCredential(var.clone())),
        }
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{}", self.cfg.endpoint.trim_end_matches('/'), route)
    }

    fn post(&self, route: &str, body: &Value) -> Result<Value, ProviderError> {
        let bearer = self.bearer()?;
        http::post_with_retry(self.transport.as_ref(), &self.retry, &self.url(route), bearer.as_deref(), body)
    }

    /// Serve from cache or call `backend` and store its response.
    fn cached<F>(&self, payload: Value, backend: F) -> Result<Keyed<CachedResponse>, ProviderError>
    where
        F: FnOnce(&str) -> Result<(CachedResponse, Option<Vec<u8>>), ProviderError>,
    {
        let request = self.canonical(payload);
        let key = cache_key(&request);
        if let Some(rec) = self.cache.lookup(&key) {
            self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Keyed { value: rec.response, cache_key: key });
        }
        if !self.cfg.is_mock() && self.transport.is_disabled() {
            return Err(ProviderError::Offline { kind: self.cfg.kind, key });
        }
        self.stats.backend_calls.fetch_add(1, Ordering::Relaxed);
        let (response, image) = backend(&key)?;
        if let Some(png) = image {
            self.cache.store_image(&key, &png)?;
        }
        let record = GenerationRecord {
            cache_key: key.clone(),
            request,
            response: response.clone(),
            created_at: Utc::now(),
            provider: self.cfg.summary(),
        };
        self.cache.store(&record)?;
        Ok(Keyed { value: response, cache_key: key })
    }

    fn expect_text(resp: CachedResponse) -> Result<String, ProviderError> {
        match resp {
            CachedResponse::Text(t) if t.trim().is_empty() => Err(ProviderError::EmptyCompletion),
            CachedResponse::Text(t) => Ok(t),
            other => Err(ProviderError::Protocol(format!("expected text, cached {other:?}"))),
        }
    }

    pub fn chat_generate(&self, system_prompt: &str, user_text: &str) -> Result<String, ProviderError> {
        self.chat_generate_keyed(system_prompt, user_text).map(|k| k.value)
    }

    pub fn chat_generate_keyed(&self, system_prompt: &str, user_text: &str) -> Result<Keyed<String>, ProviderError> {
        self.require(ProviderKind::Chat)?;
        let p = &self.cfg.params;
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_text},
            ],
            "temperature": p.temperature,
            "max_tokens": p.max_tokens,
        });
        if let Some(seed) = p.seed {
            body["seed"] = json!(seed);
        }
        let keyed = self.cached(body.clone(), |_| {
            let text = if self.cfg.is_mock() {
                mock::chat(self.cfg.mock_seed(), system_prompt, user_text)
            } else {
                let resp = self.post("chat/completions", &body)?;
                chat_content(&resp)?
            };
            Ok((CachedResponse::Text(text), None))
        })?;
        Ok(Keyed { value: Self::expect_text(keyed.value)?, cache_key: keyed.cache_key })
    }

    pub fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, ProviderError> {
        self.translate_keyed(text, source, target).map(|k| k.value)
    }

    pub fn translate_keyed(&self, text: &str, source: &str, target: &str) -> Result<Keyed<String>, ProviderError> {
        self.require(ProviderKind::Translate)?;
        if source.eq_ignore_ascii_case(target) {
            return Err(ProviderError::Input(format!("source and target language are both {source:?}")));
        }
        if text.trim().is_empty() {
            return Err(ProviderError::Input("empty text to translate".into()));
        }
        let body = json!({
            "model": self.cfg.model,
            "text": text,
            "source_language": source,
            "target_language": target,
            "temperature": self.cfg.params.temperature,
            "max_tokens": self.cfg.params.max_tokens,
        });
        let keyed = self.cached(body.clone(), |_| {
            let out = if self.cfg.is_mock() {
                mock::translate(text, source, target)
            } else {
                let resp = self.post("translations", &body)?;
                resp.get("translation")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ProviderError::Protocol("missing `translation` field".into()))?
                    .to_string()
            };
            Ok((CachedResponse::Text(out), None))
        })?;
        Ok(Keyed { value: Self::expect_text(keyed.value)?, cache_key: keyed.cache_key })
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.embed_keyed(text).map(|k| k.value)
    }

    pub fn embed_keyed(&self, text: &str) -> Result<Keyed<EmbeddingVector>, ProviderError> {
        self.require(ProviderKind::Embed)?;
        if text.trim().is_empty() {
            return Err(ProviderError::Input("empty text to embed".into()));
        }
        let body = json!({"model": self.cfg.model, "input": text});
        let mut payload = body.clone();
        payload["declared_dimension"] = json!(self.cfg.dimension);
        let keyed = self.cached(payload, |_| {
            let values = if self.cfg.is_mock() {
                mock::embed(self.cfg.mock_seed(), text, self.cfg.dimension.unwrap_or(mock::DEFAULT_EMBED_DIM))
            } else {
                let resp = self.post("embeddings", &body)?;
                resp.pointer("/data/0/embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ProviderError::Protocol("missing data[0].embedding".into()))?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| ProviderError::Protocol("non-numeric embedding entry".into())))
                    .collect::<Result<Vec<f64>, _>>()?
            };
            Ok((CachedResponse::Embedding(values), None))
        })?;
        let values = match keyed.value {
            CachedResponse::Embedding(v) => v,
            other => return Err(ProviderError::Protocol(format!("expected embedding, cached {other:?}"))),
        };
        let vector = EmbeddingVector::new(values)?;
        if let Some(expected) = self.cfg.dimension {
            if vector.dimension() != expected {
                return Err(ProviderError::Dimension { expected, got: vector.dimension() });
            }
        }
        Ok(Keyed { value: vector, cache_key: keyed.cache_key })
    }

    pub fn text_to_image(&self, prompt: &str) -> Result<Vec<u8>, ProviderError> {
        self.text_to_image_keyed(prompt).map(|k| k.value)
    }

    pub fn text_to_image_keyed(&self, prompt: &str) -> Result<Keyed<Vec<u8>>, ProviderError> {
        self.require(ProviderKind::TextToImage)?;
        if prompt.trim().is_empty() {
            return Err(ProviderError::Input("empty image prompt".into()));
        }
        let mut body = json!({
            "model": self.cfg.model,
            "prompt": prompt,
            "n": 1,
            "response_format": "b64_json",
        });
        if let Some(seed) = self.cfg.params.seed {
            body["seed"] = json!(seed);
        }
        let keyed = self.cached(body.clone(), |key| {
            let png = if self.cfg.is_mock() {
                mock::text_to_image(self.cfg.mock_seed(), prompt)
            } else {
                let resp = self.post("images/generations", &body)?;
                let b64 = resp
                    .pointer("/data/0/b64_json")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ProviderError::Protocol("missing data[0].b64_json".into()))?;
                base64::engine::general_purpose::STANDARD
                    .decode(b64)
                    .map_err(|e| ProviderError::Protocol(format!("bad base64 image: {e}")))?
            };
            mock::inspect_png(&png).map_err(|e| ProviderError::Protocol(e.to_string()))?;
            Ok((CachedResponse::Image(format!("{key}.png")), Some(png)))
        })?;
        let bytes = self.cache.read_image(&keyed.cache_key)?;
        Ok(Keyed { value: bytes, cache_key: keyed.cache_key })
    }

    pub fn image_to_text(&self, image: &[u8], prompt: &str) -> Result<String, ProviderError> {
        self.image_to_text_keyed(image, prompt).map(|k| k.value)
    }

    pub fn image_to_text_keyed(&self, image: &[u8], prompt: &str) -> Result<Keyed<String>, ProviderError> {
        self.require(ProviderKind::ImageToText)?;
        mock::inspect_png(image)?;
        let image_digest = hex::encode(Sha256::digest(image));
        let p = &self.cfg.params;
        // The key covers the image digest rather than its bytes.
        let payload = json!({
            "model": self.cfg.model,
            "prompt": prompt,
            "image_sha256": image_digest,
            "temperature": p.temperature,
            "max_tokens": p.max_tokens,
        });
        let keyed = self.cached(payload, |_| {
            let text = if self.cfg.is_mock() {
                mock::image_to_text(self.cfg.mock_seed(), image, prompt)?
            } else {
                let data_url = format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(image));
                let body = json!({
                    "model": self.cfg.model,
                    "messages": [{
                        "role": "user",
                        "content": [
                            {"type": "text", "text": prompt},
                            {"type": "image_url", "image_url": {"url": data_url}},
                        ],
                    }],
                    "temperature": p.temperature,
                    "max_tokens": p.max_tokens,
                });
                let resp = self.post("chat/completions", &body)?;
                chat_content(&resp)?
            };
            Ok((CachedResponse::Text(text), None))
        })?;
        Ok(Keyed { value: Self::expect_text(keyed.value)?, cache_key: keyed.cache_key })
    }
}

impl TextEmbedder for Provider {
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.embed(text)
    }
}

fn chat_content(resp: &Value) -> Result<String, ProviderError> {
    let content = resp
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Protocol("missing choices[0].message.content".into()))?;
    if content.trim().is_empty() {
        return Err(ProviderError::EmptyCompletion);
    }
    Ok(content.to_string())
}

/// Apply `f` to every item with at most `limit` calls in flight. Results keep
/// the input order.
pub fn map_bounded<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let limit = limit.max(1).min(items.len().max(1));
    if limit == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..limit {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provider(kind: ProviderKind, dir: &std::path::Path) -> Provider {
        Provider::new(
            ProviderConfig::mock(kind),
            Arc::new(ResponseCache::new(dir)),
            Arc::new(DisabledTransport),
        )
        .unwrap()
    }

    #[test]
    fn mock_chat_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let p = provider(ProviderKind::Chat, dir.path());
        let a = p.chat_generate_keyed("Summarise.", "The boy saw a puppy.").unwrap();
        let b = p.chat_generate_keyed("Summarise.", "The boy saw a puppy.").unwrap();
        assert_eq!(a, b);
        assert_eq!((p.backend_calls(), p.cache_hits()), (1, 1));
        assert!(p.cache().lookup(&a.cache_key).is_some());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = provider(ProviderKind::Embed, dir.path());
        assert!(matches!(p.chat_generate("s", "u"), Err(ProviderError::WrongKind { .. })));
    }

    #[test]
    fn translate_contract() {
        let dir = tempfile::tempdir().unwrap();
        let p = provider(ProviderKind::Translate, dir.path());
        assert_eq!(p.translate("Olá. Tudo bem?", "pt", "en").unwrap(), "[pt→en] Olá. [pt→en] Tudo bem?");
        assert!(matches!(p.translate("Olá.", "pt", "pt"), Err(ProviderError::Input(_))));
        assert_eq!(p.translate("Olá. Tudo bem?", "pt", "en").unwrap(), p.translate("Olá. Tudo bem?", "pt", "en").unwrap());
        assert_eq!(p.cache_hits(), 2);
    }

    #[test]
    fn embed_contract() {
        let dir = tempfile::tempdir().unwrap();
        let p = provider(ProviderKind::Embed, dir.path());
        let a = p.embed("the boy").unwrap();
        assert_eq!(a.dimension(), 256);
        assert_eq!(a, p.embed("the boy").unwrap());
        assert!(p.embed("  ").is_err());

        let mut cfg = ProviderConfig::mock(ProviderKind::Embed);
        cfg.dimension = Some(128);
        let q = Provider::new(cfg.clone(), Arc::new(ResponseCache::new(dir.path())), Arc::new(DisabledTransport)).unwrap();
        assert_eq!(q.embed("the boy").unwrap().dimension(), 128);
        // A record cached at another dimension is detected.
        cfg.dimension = Some(64);
        let key = {
            let r = Provider::new(cfg.clone(), Arc::new(ResponseCache::new(dir.path())), Arc::new(DisabledTransport)).unwrap();
            r.embed_keyed("the girl").unwrap().cache_key
        };
        let mut rec = p.cache().lookup(&key).unwrap();
        rec.response = CachedResponse::Embedding(vec![1.0; 3]);
        p.cache().store(&rec).unwrap();
        let r = Provider::new(cfg, Arc::new(ResponseCache::new(dir.path())), Arc::new(DisabledTransport)).unwrap();
        assert!(matches!(r.embed("the girl"), Err(ProviderError::Dimension { expected: 64, got: 3 })));
    }

    #[test]
    fn image_contracts() {
        let dir = tempfile::tempdir().unwrap();
        let t2i = provider(ProviderKind::TextToImage, dir.path());
        let i2t = provider(ProviderKind::ImageToText, dir.path());
        let img = t2i.text_to_image_keyed("1. The boy finds a dog.").unwrap();
        assert_eq!(img.value, t2i.text_to_image("1. The boy finds a dog.").unwrap());
        assert!(t2i.cache().image_path(&img.cache_key).is_file());
        assert!(matches!(t2i.text_to_image(""), Err(ProviderError::Input(_))));
        let caption = i2t.image_to_text_keyed(&img.value, "Describe in detail.").unwrap();
        assert_eq!(caption, i2t.image_to_text_keyed(&img.value, "Describe in detail.").unwrap());
        assert_ne!(caption.cache_key, img.cache_key);
        assert!(matches!(i2t.image_to_text(b"not a png", "Describe."), Err(ProviderError::Input(_))));
    }

    #[test]
    fn bounded_map_keeps_order() {
        let items: Vec<u32> = (0..50).collect();
        let out = map_bounded(&items, 4, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(map_bounded(&Vec::<u32>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn config_validation() {
        let mut c = ProviderConfig::mock(ProviderKind::Chat);
        assert!(c.validate().is_ok());
        c.params.temperature = -0.1;
        assert!(c.validate().is_err());
        c.params.temperature = 0.7;
        c.endpoint = "not a url".into();
        assert!(c.validate().is_err());
        c.endpoint = "ftp://x".into();
        assert!(c.validate().is_err());
    }
}
