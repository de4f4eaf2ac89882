//! Client for OpenAI-compatible `/chat/completions` endpoints.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{CompletionProvider, LlmError, ModelResponse, PromptRequest, TokenUsage};

pub struct OpenAiProvider {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::Client,
}

impl OpenAiProvider {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`.
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            client: reqwest::Client::builder()
                .timeout(timeout)
                .build()
                .expect("http client configuration is static"),
        }
    }

    /// Reads the key from the environment variable `key_var`.
    pub fn from_env(base_url: &str, key_var: &str, timeout: Duration) -> Self {
        Self::new(base_url, std::env::var(key_var).ok(), timeout)
    }

    pub fn has_credentials(&self) -> bool {
        self.api_key.is_some()
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    max_tokens: u32,
    temperature: f32,
    stream: bool,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
    #[serde(default)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

#[async_trait]
impl CompletionProvider for OpenAiProvider {
    fn id(&self) -> &str {
        "openai-compatible"
    }

    async fn complete(&self, model: &str, request: &PromptRequest) -> Result<ModelResponse, LlmError> {
        let Some(key) = &self.api_key else {
            return Err(LlmError::ProviderUnavailable("no API key configured".into()));
        };
        let body = ChatRequest {
            model,
            messages: request
                .messages()
                .into_iter()
                .map(|(role, content)| ChatMessage { role, content })
                .collect(),
            max_tokens: request.max_output_tokens,
            temperature: request.temperature,
            stream: false,
        };
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(key)
            .json(&body)
            .send()
            .await
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?;

        let status = response.status();
        if !status.is_success() {
            let detail = response.text().await.unwrap_or_default();
            let detail = detail.chars().take(300).collect::<String>();
            return Err(match status.as_u16() {
                400 | 404 | 413 | 422 => LlmError::InvalidRequest(format!("HTTP {status}: {detail}")),
                _ => LlmError::ProviderUnavailable(format!("HTTP {status}: {detail}")),
            });
        }

        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| LlmError::ProviderUnavailable(format!("malformed response: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        if text.trim().is_empty() {
            return Err(LlmError::ResponseEmpty);
        }
        let usage = parsed.usage.map_or(TokenUsage::default(), |u| TokenUsage {
            input: u.prompt_tokens,
            output: u.completion_tokens,
        });
        Ok(ModelResponse {
            text,
            token_usage: usage,
            provider_id: self.id().to_string(),
            model_id: parsed.model.unwrap_or_else(|| model.to_string()),
        })
    }
}
