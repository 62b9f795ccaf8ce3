//! HTTP backends. Generation speaks the OpenAI-compatible chat-completions
//! protocol; the embedding, sentiment, and classifier backends use a small
//! JSON POST contract (see README) so any local scoring server can serve
//! them. API keys come from the environment, never from config files.

use serde::{Deserialize, Serialize};

use super::{
    EmbeddingBackend, GenerationBackend, GenerationRequest, SentimentBackend, SentimentResult,
    TokenEmbeddings, ValidityBackend,
};
use crate::error::{Error, Result};

fn client() -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(120))
        .build()
        .map_err(|e| Error::Config(format!("http client: {e}")))
}

fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
    endpoint: &str,
    api_key: Option<&str>,
    body: &B,
) -> Result<R> {
    let mut req = client()?.post(endpoint).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req
        .send()
        .map_err(|e| Error::Config(format!("request to {endpoint} failed: {e}")))?;
    let status = resp.status();
    if status.as_u16() == 413 || status.as_u16() == 422 {
        return Err(Error::ContextOverflow);
    }
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Err(Error::Config(format!("{endpoint} returned {status}: {body}")));
    }
    resp.json()
        .map_err(|e| Error::Config(format!("bad response from {endpoint}: {e}")))
}

pub struct HttpGeneration {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpGeneration {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let endpoint = endpoint.into();
        let model = model.into();
        Self {
            id: format!("http:{model}@{endpoint}"),
            endpoint,
            model,
            api_key,
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

impl GenerationBackend for HttpGeneration {
    fn id(&self) -> &str {
        &self.id
    }
    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            seed: req.seed,
        };
        let resp: ChatResponse = post_json(&self.endpoint, self.api_key.as_deref(), &body)?;
        resp.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Config("empty choices in chat response".into()))
    }
}

pub struct HttpEmbedding {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpEmbedding {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let endpoint = endpoint.into();
        let model = model.into();
        Self {
            id: format!("http:{model}@{endpoint}"),
            endpoint,
            model,
            api_key,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    text: &'a str,
}

impl EmbeddingBackend for HttpEmbedding {
    fn id(&self) -> &str {
        &self.id
    }
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings> {
        post_json(
            &self.endpoint,
            self.api_key.as_deref(),
            &EmbedRequest {
                model: &self.model,
                text,
            },
        )
    }
}

pub struct HttpSentiment {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpSentiment {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let endpoint = endpoint.into();
        let model = model.into();
        Self {
            id: format!("http:{model}@{endpoint}"),
            endpoint,
            model,
            api_key,
        }
    }
}

impl SentimentBackend for HttpSentiment {
    fn id(&self) -> &str {
        &self.id
    }
    fn sentiment(&self, text: &str) -> Result<SentimentResult> {
        post_json(
            &self.endpoint,
            self.api_key.as_deref(),
            &EmbedRequest {
                model: &self.model,
                text,
            },
        )
    }
}

pub struct HttpValidity {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpValidity {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let endpoint = endpoint.into();
        let model = model.into();
        Self {
            id: format!("http:{model}@{endpoint}"),
            endpoint,
            model,
            api_key,
        }
    }
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    model: &'a str,
    query: &'a str,
    response: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    positive_logit: f64,
}

impl ValidityBackend for HttpValidity {
    fn id(&self) -> &str {
        &self.id
    }
    fn positive_logit(&self, query: &str, response_text: &str) -> Result<f64> {
        let resp: ClassifyResponse = post_json(
            &self.endpoint,
            self.api_key.as_deref(),
            &ClassifyRequest {
                model: &self.model,
                query,
                response: response_text,
            },
        )?;
        Ok(resp.positive_logit)
    }
}
