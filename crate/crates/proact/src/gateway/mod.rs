//! Uniform, cache-backed access to the four model capabilities the metrics
//! and pipelines compose: text generation, contextual token embeddings,
//! sentiment classification, and validity classification. Each capability
//! is a pluggable backend; stub backends make everything runnable offline.

mod cache;
pub mod config;
pub mod http;
mod limiter;
pub mod stub;

pub use cache::DiskCache;
pub use config::{BackendConfig, GatewayConfig};

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{ElementKind, ProactiveResponse};
use crate::error::{Error, Result};
use limiter::Limiter;

/// A single text-generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, temperature: f64, max_tokens: usize) -> Self {
        Self {
            prompt: prompt.into(),
            temperature,
            max_tokens,
            seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(Error::EmptyText);
        }
        if !(0.0..=2.0).contains(&self.temperature) || self.max_tokens < 1 {
            return Err(Error::Config(format!(
                "invalid generation request: temperature {} / max_tokens {}",
                self.temperature, self.max_tokens
            )));
        }
        Ok(())
    }

    /// Deterministic requests are cacheable.
    pub fn is_deterministic(&self) -> bool {
        self.temperature == 0.0 || self.seed.is_some()
    }
}

/// Per-token contextual embeddings for one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddings {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl TokenEmbeddings {
    fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() || self.tokens.len() != self.vectors.len() {
            return Err(Error::Config("token/vector count mismatch".into()));
        }
        let d = self.vectors[0].len();
        if d == 0 || self.vectors.iter().any(|v| v.len() != d) {
            return Err(Error::Config("inconsistent embedding dimensions".into()));
        }
        if self
            .vectors
            .iter()
            .any(|v| v.iter().map(|x| x * x).sum::<f64>() == 0.0)
        {
            return Err(Error::Config("zero embedding vector".into()));
        }
        Ok(())
    }
}

/// Three-way sentiment distribution; the three probabilities sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
}

impl SentimentResult {
    fn validate(&self) -> Result<()> {
        let sum = self.positive + self.neutral + self.negative;
        let ok = [self.positive, self.neutral, self.negative]
            .iter()
            .all(|p| (0.0..=1.0).contains(p));
        if !ok || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "sentiment probabilities not normalized: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Validity classifier output: raw positive logit plus its logistic
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityScore {
    pub positive_logit: f64,
    pub probability: f64,
}

impl ValidityScore {
    pub fn from_logit(positive_logit: f64) -> Self {
        Self {
            positive_logit,
            probability: 1.0 / (1.0 + (-positive_logit).exp()),
        }
    }
}

/// Identifiers and limits for the configured backends. Hashing the profile
/// pins score reports to the exact backend set that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendProfile {
    pub generation_id: String,
    pub embedding_id: String,
    pub sentiment_id: String,
    pub classifier_fq_id: Option<String>,
    pub classifier_ai_id: Option<String>,
    pub cache_dir: Option<std::path::PathBuf>,
    pub max_parallel: usize,
}

impl BackendProfile {
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("profile serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, req: &GenerationRequest) -> Result<String>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings>;
}

pub trait SentimentBackend: Send + Sync {
    fn id(&self) -> &str;
    fn sentiment(&self, text: &str) -> Result<SentimentResult>;
}

pub trait ValidityBackend: Send + Sync {
    fn id(&self) -> &str;
    fn positive_logit(&self, query: &str, response_text: &str) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// No delays, single attempt. Used by tests and stub-only runs.
    pub fn immediate() -> Self {
        Self {
            attempts: 1,
            base_delay: Duration::ZERO,
        }
    }
}

pub struct Gateway {
    generation: Arc<dyn GenerationBackend>,
    embedding: Arc<dyn EmbeddingBackend>,
    sentiment: Arc<dyn SentimentBackend>,
    classifier_fq: Option<Arc<dyn ValidityBackend>>,
    classifier_ai: Option<Arc<dyn ValidityBackend>>,
    cache: Option<DiskCache>,
    limiter: Limiter,
    retry: RetryPolicy,
    max_parallel: usize,
}

pub struct GatewayBuilder {
    generation: Arc<dyn GenerationBackend>,
    embedding: Arc<dyn EmbeddingBackend>,
    sentiment: Arc<dyn SentimentBackend>,
    classifier_fq: Option<Arc<dyn ValidityBackend>>,
    classifier_ai: Option<Arc<dyn ValidityBackend>>,
    cache_dir: Option<std::path::PathBuf>,
    retry: RetryPolicy,
    max_parallel: usize,
}

impl GatewayBuilder {
    pub fn new(
        generation: Arc<dyn GenerationBackend>,
        embedding: Arc<dyn EmbeddingBackend>,
        sentiment: Arc<dyn SentimentBackend>,
    ) -> Self {
        Self {
            generation,
            embedding,
            sentiment,
            classifier_fq: None,
            classifier_ai: None,
            cache_dir: None,
            retry: RetryPolicy::default(),
            max_parallel: 4,
        }
    }

    pub fn classifier(mut self, kind: ElementKind, backend: Arc<dyn ValidityBackend>) -> Self {
        match kind {
            ElementKind::FollowUpQuestion => self.classifier_fq = Some(backend),
            ElementKind::AdditionalInformation => self.classifier_ai = Some(backend),
        }
        self
    }

    pub fn cache_dir(mut self, dir: impl Into<std::path::PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn max_parallel(mut self, n: usize) -> Self {
        self.max_parallel = n.max(1);
        self
    }

    pub fn build(self) -> Result<Gateway> {
        let cache = match &self.cache_dir {
            Some(dir) => Some(DiskCache::open(dir)?),
            None => None,
        };
        Ok(Gateway {
            generation: self.generation,
            embedding: self.embedding,
            sentiment: self.sentiment,
            classifier_fq: self.classifier_fq,
            classifier_ai: self.classifier_ai,
            cache,
            limiter: Limiter::new(self.max_parallel),
            retry: self.retry,
            max_parallel: self.max_parallel,
        })
    }
}

impl Gateway {
    pub fn profile(&self) -> BackendProfile {
        BackendProfile {
            generation_id: self.generation.id().to_string(),
            embedding_id: self.embedding.id().to_string(),
            sentiment_id: self.sentiment.id().to_string(),
            classifier_fq_id: self.classifier_fq.as_ref().map(|c| c.id().to_string()),
            classifier_ai_id: self.classifier_ai.as_ref().map(|c| c.id().to_string()),
            cache_dir: self.cache.as_ref().map(|c| c.dir().to_path_buf()),
            max_parallel: self.max_parallel,
        }
    }

    fn cache_key<T: Serialize>(&self, capability: &str, backend_id: &str, req: &T) -> String {
        let mut hasher = Sha256::new();
        hasher.update(capability.as_bytes());
        hasher.update(b"\x00");
        hasher.update(backend_id.as_bytes());
        hasher.update(b"\x00");
        hasher.update(serde_json::to_vec(req).expect("request serializes"));
        hex::encode(hasher.finalize())
    }

    fn with_retry<T, F: Fn() -> Result<T>>(&self, call: F) -> Result<T> {
        let mut last = None;
        for attempt in 0..self.retry.attempts {
            if attempt > 0 && !self.retry.base_delay.is_zero() {
                let backoff = self.retry.base_delay * 2u32.pow(attempt as u32 - 1);
                let jitter = backoff.mul_f64(rand::random::<f64>() * 0.25);
                std::thread::sleep(backoff + jitter);
            }
            let _permit = self.limiter.acquire();
            match call() {
                Ok(v) => return Ok(v),
                // a full context never shrinks on retry
                Err(Error::ContextOverflow) => return Err(Error::ContextOverflow),
                Err(e) => last = Some(e),
            }
        }
        Err(Error::BackendUnavailable {
            attempts: self.retry.attempts,
            last_error: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }

    fn cached<T, F>(&self, capability: &str, key: &str, call: F) -> Result<T>
    where
        T: Serialize + for<'de> Deserialize<'de>,
        F: Fn() -> Result<T>,
    {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get::<T>(capability, key)? {
                return Ok(hit);
            }
        }
        let value = self.with_retry(call)?;
        if let Some(cache) = &self.cache {
            cache.put(capability, key, &value)?;
        }
        Ok(value)
    }

    /// One completion. Deterministic requests (temperature 0 or fixed seed)
    /// are served from the disk cache when available; sampled requests are
    /// never cached.
    pub fn generate(&self, req: &GenerationRequest) -> Result<String> {
        req.validate()?;
        let backend = Arc::clone(&self.generation);
        if req.is_deterministic() {
            let key = self.cache_key("generate", backend.id(), req);
            self.cached("generate", &key, || backend.generate(req))
        } else {
            self.with_retry(|| backend.generate(req))
        }
    }

    /// Contextual per-token embeddings, cached by (text, backend id).
    pub fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let backend = Arc::clone(&self.embedding);
        let key = self.cache_key("embed", backend.id(), &text);
        let emb = self.cached("embed", &key, || backend.embed_tokens(text))?;
        emb.validate()?;
        Ok(emb)
    }

    /// Sentiment distribution, cached by (text, backend id).
    pub fn sentiment(&self, text: &str) -> Result<SentimentResult> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let backend = Arc::clone(&self.sentiment);
        let key = self.cache_key("sentiment", backend.id(), &text);
        let res = self.cached("sentiment", &key, || backend.sentiment(text))?;
        res.validate()?;
        Ok(res)
    }

    /// Validity score from the kind-specific classifier.
    pub fn classify_validity(
        &self,
        query: &str,
        response: &ProactiveResponse,
        kind: ElementKind,
    ) -> Result<ValidityScore> {
        let backend = match kind {
            ElementKind::FollowUpQuestion => self.classifier_fq.as_ref(),
            ElementKind::AdditionalInformation => self.classifier_ai.as_ref(),
        }
        .ok_or(Error::ClassifierNotConfigured(kind))?;
        let backend = Arc::clone(backend);
        let key = self.cache_key(
            "classify",
            backend.id(),
            &(query, &response.full_text, kind),
        );
        let text = response.full_text.clone();
        let query = query.to_string();
        let logit = self.cached("classify", &key, || backend.positive_logit(&query, &text))?;
        Ok(ValidityScore::from_logit(logit))
    }
}

#[cfg(test)]
mod tests {
    use super::stub::*;
    use super::*;
    use std::sync::atomic::Ordering;

    fn stub_gateway(generation: Arc<dyn GenerationBackend>) -> Gateway {
        GatewayBuilder::new(
            generation,
            Arc::new(HashEmbedding::default()),
            Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
        )
        .retry(RetryPolicy::immediate())
        .build()
        .unwrap()
    }

    #[test]
    fn echo_generation() {
        let gw = stub_gateway(Arc::new(EchoGeneration));
        let out = gw
            .generate(&GenerationRequest::new("ping", 0.0, 16))
            .unwrap();
        assert_eq!(out, "ping");
    }

    #[test]
    fn deterministic_requests_hit_cache() {
        let dir = tempfile::tempdir().unwrap();
        let counting = Arc::new(CountingGeneration::new(EchoGeneration));
        let gw = GatewayBuilder::new(
            counting.clone(),
            Arc::new(HashEmbedding::default()),
            Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
        )
        .cache_dir(dir.path())
        .retry(RetryPolicy::immediate())
        .build()
        .unwrap();

        let req = GenerationRequest::new("ping", 0.0, 16);
        let a = gw.generate(&req).unwrap();
        let b = gw.generate(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(counting.calls.load(Ordering::SeqCst), 1);

        // sampled requests bypass the cache
        let sampled = GenerationRequest::new("ping", 0.7, 16);
        gw.generate(&sampled).unwrap();
        gw.generate(&sampled).unwrap();
        assert_eq!(counting.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn cache_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let req = GenerationRequest::new("persist me", 0.0, 16);
        let first = {
            let counting = Arc::new(CountingGeneration::new(EchoGeneration));
            let gw = GatewayBuilder::new(
                counting,
                Arc::new(HashEmbedding::default()),
                Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
            )
            .cache_dir(dir.path())
            .build()
            .unwrap();
            gw.generate(&req).unwrap()
        };
        let counting = Arc::new(CountingGeneration::new(EchoGeneration));
        let gw = GatewayBuilder::new(
            counting.clone(),
            Arc::new(HashEmbedding::default()),
            Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
        )
        .cache_dir(dir.path())
        .build()
        .unwrap();
        assert_eq!(gw.generate(&req).unwrap(), first);
        assert_eq!(counting.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn unavailable_after_retries() {
        let failing = Arc::new(FailingGeneration::new("connection refused"));
        let gw = GatewayBuilder::new(
            failing.clone(),
            Arc::new(HashEmbedding::default()),
            Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
        )
        .retry(RetryPolicy {
            attempts: 3,
            base_delay: Duration::ZERO,
        })
        .build()
        .unwrap();
        match gw.generate(&GenerationRequest::new("x", 0.7, 8)) {
            Err(Error::BackendUnavailable {
                attempts: 3,
                last_error,
            }) => assert!(last_error.contains("connection refused")),
            other => panic!("expected BackendUnavailable, got {other:?}"),
        }
        assert_eq!(failing.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn embeddings_cached_and_empty_rejected() {
        let gw = stub_gateway(Arc::new(EchoGeneration));
        let a = gw.embed_tokens("hello world").unwrap();
        let b = gw.embed_tokens("hello world").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens, vec!["hello", "world"]);
        assert!(matches!(gw.embed_tokens(""), Err(Error::EmptyText)));
    }

    #[test]
    fn sentiment_normalized() {
        let gw = stub_gateway(Arc::new(EchoGeneration));
        let s = gw.sentiment("anything").unwrap();
        assert!((s.positive + s.neutral + s.negative - 1.0).abs() <= 1e-6);
        assert_eq!(s.positive, 1.0);
    }

    #[test]
    fn validity_logistic() {
        let gw = GatewayBuilder::new(
            Arc::new(EchoGeneration),
            Arc::new(HashEmbedding::default()),
            Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
        )
        .classifier(
            ElementKind::FollowUpQuestion,
            Arc::new(ConstValidity::new("stub:logit3", 3.0)),
        )
        .build()
        .unwrap();
        let resp = ProactiveResponse::with_element("a", "b?", ElementKind::FollowUpQuestion).unwrap();
        let score = gw
            .classify_validity("q", &resp, ElementKind::FollowUpQuestion)
            .unwrap();
        // logistic(3) computed independently: 1/(1+e^-3)
        assert!((score.probability - 0.9525741268224334).abs() < 1e-12);

        let zero_gw = GatewayBuilder::new(
            Arc::new(EchoGeneration),
            Arc::new(HashEmbedding::default()),
            Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
        )
        .classifier(
            ElementKind::FollowUpQuestion,
            Arc::new(ConstValidity::new("stub:logit0", 0.0)),
        )
        .build()
        .unwrap();
        let score = zero_gw
            .classify_validity("q", &resp, ElementKind::FollowUpQuestion)
            .unwrap();
        assert_eq!(score.probability, 0.5);

        assert!(matches!(
            gw.classify_validity("q", &resp, ElementKind::AdditionalInformation),
            Err(Error::ClassifierNotConfigured(
                ElementKind::AdditionalInformation
            ))
        ));
    }

    #[test]
    fn parallelism_is_bounded() {
        let tracking = Arc::new(ConcurrencyTrackingGeneration::new(Duration::from_millis(5)));
        let gw = Arc::new(
            GatewayBuilder::new(
                tracking.clone(),
                Arc::new(HashEmbedding::default()),
                Arc::new(ConstSentiment::new("stub:pos", 1.0, 0.0, 0.0)),
            )
            .max_parallel(2)
            .retry(RetryPolicy::immediate())
            .build()
            .unwrap(),
        );
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let gw = Arc::clone(&gw);
                std::thread::spawn(move || {
                    gw.generate(&GenerationRequest::new(format!("p{i}"), 0.7, 8))
                        .unwrap()
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(tracking.max_observed.load(Ordering::SeqCst) <= 2);
        assert_eq!(tracking.calls.load(Ordering::SeqCst), 8);
    }
}
