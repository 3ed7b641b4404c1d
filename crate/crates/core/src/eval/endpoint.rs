use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Connection settings for an OpenAI-compatible chat endpoint. The API key
/// itself is never stored; only the name of the variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: Option<String>,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model_name: "model".to_string(),
            api_key_env: None,
            max_in_flight: 8,
            timeout_ms: 600_000,
            max_retries: 3,
            backoff_base_ms: 500,
            temperature: None,
            max_tokens: None,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.base_url.trim().is_empty() {
            return Err("base_url is empty".into());
        }
        if self.model_name.trim().is_empty() {
            return Err("model_name is empty".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        if self.timeout_ms == 0 {
            return Err("timeout_ms must be positive".into());
        }
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return Err(format!("temperature {t} outside [0, 2]"));
            }
        }
        Ok(())
    }

    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(16);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub reasoning: Option<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EndpointError {
    #[error("request timed out")]
    Timeout,
    #[error("transient endpoint failure: {0}")]
    Transient(String),
    #[error("endpoint rejected the request: {0}")]
    Fatal(String),
    #[error("malformed endpoint reply: {0}")]
    Malformed(String),
}

impl EndpointError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EndpointError::Timeout | EndpointError::Transient(_))
    }
}

#[async_trait]
pub trait ChatEndpoint: Send + Sync {
    fn model_name(&self) -> &str;

    /// Sends `prompt` as a single user message.
    async fn complete(&self, prompt: &str) -> Result<ChatReply, EndpointError>;
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireMessage {
    pub role: String,
    #[serde(default)]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireChoice {
    pub message: WireMessage,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireResponse {
    pub choices: Vec<WireChoice>,
}

/// HTTP client for `POST {base_url}/chat/completions`.
pub struct HttpEndpoint {
    client: reqwest::Client,
    url: String,
    config: EndpointConfig,
    api_key: Option<String>,
}

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> Result<Self, EndpointError> {
        config.validate().map_err(EndpointError::Fatal)?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| EndpointError::Fatal(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| EndpointError::Fatal(e.to_string()))?;
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(HttpEndpoint {
            client,
            url,
            config,
            api_key,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }
}

fn classify(e: reqwest::Error) -> EndpointError {
    if e.is_timeout() {
        EndpointError::Timeout
    } else if e.is_connect() || e.is_request() || e.is_body() {
        EndpointError::Transient(e.to_string())
    } else if e.is_decode() {
        EndpointError::Malformed(e.to_string())
    } else {
        EndpointError::Fatal(e.to_string())
    }
}

#[async_trait]
impl ChatEndpoint for HttpEndpoint {
    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    async fn complete(&self, prompt: &str) -> Result<ChatReply, EndpointError> {
        let body = WireRequest {
            model: self.config.model_name.clone(),
            messages: vec![WireMessage {
                role: "user".into(),
                content: Some(prompt.to_string()),
                reasoning_content: None,
                reasoning: None,
            }],
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(classify)?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(EndpointError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            return Err(EndpointError::Fatal(format!("HTTP {status}: {text}")));
        }
        let bytes = resp.bytes().await.map_err(classify)?;
        let wire: WireResponse =
            serde_json::from_slice(&bytes).map_err(|e| EndpointError::Malformed(e.to_string()))?;
        let message = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| EndpointError::Malformed("no choices".into()))?
            .message;
        Ok(ChatReply {
            content: message.content.unwrap_or_default(),
            reasoning: message.reasoning_content.or(message.reasoning),
        })
    }
}
