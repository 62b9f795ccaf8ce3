//! Gateway construction from a structured TOML config file. Secrets are
//! referenced by environment-variable name, never stored inline.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{http, stub, Gateway, GatewayBuilder, RetryPolicy};
use crate::corpus::ElementKind;
use crate::error::{Error, Result};

/// One capability's backend. `backend` selects the implementation:
/// `stub:echo`, `stub:hash-embedding`, `stub:lexicon-sentiment`,
/// `stub:const-validity`, or `http`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Constant logit for `stub:const-validity`.
    #[serde(default)]
    pub logit: Option<f64>,
}

impl BackendConfig {
    pub fn stub(name: &str) -> Self {
        Self {
            backend: name.to_string(),
            endpoint: None,
            model: None,
            api_key_env: None,
            logit: None,
        }
    }

    fn api_key(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Config(format!("environment variable {var} not set"))),
        }
    }

    fn http_parts(&self) -> Result<(String, String, Option<String>)> {
        let endpoint = self
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("http backend requires `endpoint`".into()))?;
        let model = self.model.clone().unwrap_or_default();
        Ok((endpoint, model, self.api_key()?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub retries: usize,
    pub generation: BackendConfig,
    pub embedding: BackendConfig,
    pub sentiment: BackendConfig,
    #[serde(default)]
    pub classifier_fq: Option<BackendConfig>,
    #[serde(default)]
    pub classifier_ai: Option<BackendConfig>,
}

fn default_max_parallel() -> usize {
    4
}

fn default_retries() -> usize {
    3
}

impl GatewayConfig {
    /// All-stub config; every command runs end-to-end offline with it.
    pub fn offline() -> Self {
        Self {
            max_parallel: 4,
            cache_dir: None,
            retries: 1,
            generation: BackendConfig::stub("stub:echo"),
            embedding: BackendConfig::stub("stub:hash-embedding"),
            sentiment: BackendConfig::stub("stub:lexicon-sentiment"),
            classifier_fq: Some(BackendConfig {
                logit: Some(1.0),
                ..BackendConfig::stub("stub:const-validity")
            }),
            classifier_ai: Some(BackendConfig {
                logit: Some(1.0),
                ..BackendConfig::stub("stub:const-validity")
            }),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let body = std::fs::read_to_string(path)?;
        toml::from_str(&body).map_err(|e| Error::Config(format!("bad gateway config: {e}")))
    }

    pub fn build(&self) -> Result<Gateway> {
        let generation: Arc<dyn super::GenerationBackend> = match self.generation.backend.as_str()
        {
            "stub:echo" => Arc::new(stub::EchoGeneration),
            "http" => {
                let (endpoint, model, key) = self.generation.http_parts()?;
                Arc::new(http::HttpGeneration::new(endpoint, model, key))
            }
            other => return Err(Error::Config(format!("unknown generation backend: {other}"))),
        };
        let embedding: Arc<dyn super::EmbeddingBackend> = match self.embedding.backend.as_str() {
            "stub:hash-embedding" => Arc::new(stub::HashEmbedding::default()),
            "http" => {
                let (endpoint, model, key) = self.embedding.http_parts()?;
                Arc::new(http::HttpEmbedding::new(endpoint, model, key))
            }
            other => return Err(Error::Config(format!("unknown embedding backend: {other}"))),
        };
        let sentiment: Arc<dyn super::SentimentBackend> = match self.sentiment.backend.as_str() {
            "stub:lexicon-sentiment" => Arc::new(stub::LexiconSentiment),
            "http" => {
                let (endpoint, model, key) = self.sentiment.http_parts()?;
                Arc::new(http::HttpSentiment::new(endpoint, model, key))
            }
            other => return Err(Error::Config(format!("unknown sentiment backend: {other}"))),
        };

        let mut builder = GatewayBuilder::new(generation, embedding, sentiment)
            .max_parallel(self.max_parallel)
            .retry(RetryPolicy {
                attempts: self.retries.max(1),
                ..RetryPolicy::default()
            });
        if let Some(dir) = &self.cache_dir {
            builder = builder.cache_dir(dir);
        }
        for (kind, cfg) in [
            (ElementKind::FollowUpQuestion, &self.classifier_fq),
            (ElementKind::AdditionalInformation, &self.classifier_ai),
        ] {
            if let Some(cfg) = cfg {
                let backend: Arc<dyn super::ValidityBackend> = match cfg.backend.as_str() {
                    "stub:const-validity" => Arc::new(stub::ConstValidity::new(
                        format!("stub:const-validity:{}", kind.short()),
                        cfg.logit.unwrap_or(0.0),
                    )),
                    "http" => {
                        let (endpoint, model, key) = cfg.http_parts()?;
                        Arc::new(http::HttpValidity::new(endpoint, model, key))
                    }
                    other => {
                        return Err(Error::Config(format!("unknown classifier backend: {other}")))
                    }
                };
                builder = builder.classifier(kind, backend);
            }
        }
        builder.build()
    }
}
