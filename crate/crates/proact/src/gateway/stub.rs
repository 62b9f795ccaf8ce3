//! Stub backends. They make every metric and pipeline runnable and testable
//! offline, and give tests precise control over backend behavior.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::{
    EmbeddingBackend, GenerationBackend, GenerationRequest, SentimentBackend, SentimentResult,
    TokenEmbeddings, ValidityBackend,
};
use crate::error::{Error, Result};

/// Returns the prompt verbatim.
#[derive(Default)]
pub struct EchoGeneration;

impl GenerationBackend for EchoGeneration {
    fn id(&self) -> &str {
        "stub:echo"
    }
    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        Ok(req.prompt.clone())
    }
}

/// Pops pre-scripted completions in order; errors when the script runs dry.
pub struct ScriptedGeneration {
    id: String,
    script: Mutex<VecDeque<String>>,
}

impl ScriptedGeneration {
    pub fn new(outputs: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            id: "stub:scripted".to_string(),
            script: Mutex::new(outputs.into_iter().map(Into::into).collect()),
        }
    }
}

impl GenerationBackend for ScriptedGeneration {
    fn id(&self) -> &str {
        &self.id
    }
    fn generate(&self, _req: &GenerationRequest) -> Result<String> {
        self.script
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| Error::Config("scripted generation exhausted".into()))
    }
}

/// Routes on the request: whatever the closure says, goes.
pub struct ClosureGeneration<F> {
    id: String,
    f: F,
}

impl<F> ClosureGeneration<F>
where
    F: Fn(&GenerationRequest) -> Result<String> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self { id: id.into(), f }
    }
}

impl<F> GenerationBackend for ClosureGeneration<F>
where
    F: Fn(&GenerationRequest) -> Result<String> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }
    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        (self.f)(req)
    }
}

/// Always fails with the given message.
pub struct FailingGeneration {
    message: String,
    pub calls: AtomicUsize,
}

impl FailingGeneration {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            calls: AtomicUsize::new(0),
        }
    }
}

impl GenerationBackend for FailingGeneration {
    fn id(&self) -> &str {
        "stub:failing"
    }
    fn generate(&self, _req: &GenerationRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(Error::Config(self.message.clone()))
    }
}

/// Wraps another backend and counts calls that reach it.
pub struct CountingGeneration<B> {
    inner: B,
    pub calls: AtomicUsize,
}

impl<B: GenerationBackend> CountingGeneration<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }
}

impl<B: GenerationBackend> GenerationBackend for CountingGeneration<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(req)
    }
}

/// Records the highest number of concurrently in-flight calls it sees.
pub struct ConcurrencyTrackingGeneration {
    in_flight: AtomicUsize,
    pub max_observed: AtomicUsize,
    pub calls: AtomicUsize,
    hold: Duration,
}

impl ConcurrencyTrackingGeneration {
    pub fn new(hold: Duration) -> Self {
        Self {
            in_flight: AtomicUsize::new(0),
            max_observed: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
            hold,
        }
    }
}

impl GenerationBackend for ConcurrencyTrackingGeneration {
    fn id(&self) -> &str {
        "stub:tracking"
    }
    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_observed.fetch_max(now, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(self.hold);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        Ok(req.prompt.clone())
    }
}

/// Deterministic pseudo-contextual embeddings: each whitespace token maps to
/// a fixed unit vector derived from its hash, so equal tokens always match
/// with cosine 1 and distinct tokens land near-orthogonal.
pub struct HashEmbedding {
    dim: usize,
}

impl Default for HashEmbedding {
    fn default() -> Self {
        Self { dim: 32 }
    }
}

impl HashEmbedding {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(4) }
    }
}

impl EmbeddingBackend for HashEmbedding {
    fn id(&self) -> &str {
        "stub:hash-embedding"
    }
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let vectors = tokens
            .iter()
            .map(|t| {
                let mut v = Vec::with_capacity(self.dim);
                let mut counter = 0u32;
                while v.len() < self.dim {
                    let mut hasher = Sha256::new();
                    hasher.update(t.to_lowercase().as_bytes());
                    hasher.update(counter.to_le_bytes());
                    for chunk in hasher.finalize().chunks(4) {
                        if v.len() == self.dim {
                            break;
                        }
                        let bits = u32::from_le_bytes(chunk.try_into().unwrap());
                        v.push(bits as f64 / u32::MAX as f64 - 0.5);
                    }
                    counter += 1;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm).collect()
            })
            .collect();
        Ok(TokenEmbeddings { tokens, vectors })
    }
}

/// Maps each distinct token to its own orthonormal basis vector, assigned
/// in order of first appearance. Lets tests pin exact cosine matrices.
pub struct BasisEmbedding {
    dim: usize,
    assignment: Mutex<HashMap<String, usize>>,
}

impl BasisEmbedding {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            assignment: Mutex::new(HashMap::new()),
        }
    }
}

impl EmbeddingBackend for BasisEmbedding {
    fn id(&self) -> &str {
        "stub:basis-embedding"
    }
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut assignment = self.assignment.lock().unwrap();
        let mut vectors = Vec::with_capacity(tokens.len());
        for t in &tokens {
            let next = assignment.len();
            let idx = *assignment.entry(t.clone()).or_insert(next);
            if idx >= self.dim {
                return Err(Error::Config("basis embedding dimension exhausted".into()));
            }
            let mut v = vec![0.0; self.dim];
            v[idx] = 1.0;
            vectors.push(v);
        }
        Ok(TokenEmbeddings { tokens, vectors })
    }
}

/// Fixed sentiment distribution for any input.
pub struct ConstSentiment {
    id: String,
    result: SentimentResult,
}

impl ConstSentiment {
    pub fn new(id: impl Into<String>, positive: f64, neutral: f64, negative: f64) -> Self {
        Self {
            id: id.into(),
            result: SentimentResult {
                positive,
                neutral,
                negative,
            },
        }
    }
}

impl SentimentBackend for ConstSentiment {
    fn id(&self) -> &str {
        &self.id
    }
    fn sentiment(&self, _text: &str) -> Result<SentimentResult> {
        Ok(self.result)
    }
}

/// Keyword-based sentiment, good enough for offline demos: enthusiastic
/// acknowledgments score positive, complaints negative, everything else
/// neutral-leaning.
#[derive(Default)]
pub struct LexiconSentiment;

impl SentimentBackend for LexiconSentiment {
    fn id(&self) -> &str {
        "stub:lexicon-sentiment"
    }
    fn sentiment(&self, text: &str) -> Result<SentimentResult> {
        let lower = text.to_lowercase();
        let positive_cues = [
            "thank", "yes", "wow", "great", "interesting", "love", "sure", "amazing", "nice",
        ];
        let negative_cues = ["no ", "bad", "wrong", "useless", "boring", "unhelpful"];
        let pos = positive_cues.iter().filter(|c| lower.contains(*c)).count();
        let neg = negative_cues.iter().filter(|c| lower.contains(*c)).count();
        let result = if pos > 0 && pos >= neg {
            SentimentResult {
                positive: (0.6 + 0.1 * pos as f64).min(0.95),
                neutral: 0.0,
                negative: 0.0,
            }
        } else if neg > 0 {
            SentimentResult {
                positive: 0.05,
                neutral: 0.25,
                negative: 0.70,
            }
        } else {
            SentimentResult {
                positive: 0.25,
                neutral: 0.65,
                negative: 0.10,
            }
        };
        let mut r = result;
        r.neutral = 1.0 - r.positive - r.negative;
        Ok(r)
    }
}

/// Scripted per-call positive sentiments, popped in order.
pub struct ScriptedSentiment {
    script: Mutex<VecDeque<f64>>,
}

impl ScriptedSentiment {
    pub fn new(positives: impl IntoIterator<Item = f64>) -> Self {
        Self {
            script: Mutex::new(positives.into_iter().collect()),
        }
    }
}

impl SentimentBackend for ScriptedSentiment {
    fn id(&self) -> &str {
        "stub:scripted-sentiment"
    }
    fn sentiment(&self, _text: &str) -> Result<SentimentResult> {
        let positive = self
            .script
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| Error::Config("scripted sentiment exhausted".into()))?;
        Ok(SentimentResult {
            positive,
            neutral: 1.0 - positive,
            negative: 0.0,
        })
    }
}

/// Constant positive logit.
pub struct ConstValidity {
    id: String,
    logit: f64,
}

impl ConstValidity {
    pub fn new(id: impl Into<String>, logit: f64) -> Self {
        Self {
            id: id.into(),
            logit,
        }
    }
}

impl ValidityBackend for ConstValidity {
    fn id(&self) -> &str {
        &self.id
    }
    fn positive_logit(&self, _query: &str, _response_text: &str) -> Result<f64> {
        Ok(self.logit)
    }
}
