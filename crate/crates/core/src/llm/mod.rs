//! Model access: prompt rendering, two model tiers, and provider backends.

mod mock;
mod openai;
mod prompts;
mod settings;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mock::{MockFailure, MockProvider, MockReply, MockRule, RecordedCall, ScenarioError};
pub use openai::OpenAiProvider;
pub use prompts::{
    estimate_tokens, fill, PromptRenderer, RenderedPrompt, TemplateSet, FORMAT_REMINDER, GENERAL_TOPIC,
    TRUNCATION_MARKER,
};
pub use settings::{Complexity, ResponseLength, UserSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Assessments and chat answers.
    Assessment,
    /// Suggested follow-up questions.
    Lightweight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
}

impl Turn {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub tier: Tier,
    pub system_prompt: String,
    /// Earlier turns of the conversation, oldest first.
    #[serde(default)]
    pub history: Vec<Turn>,
    pub user_prompt: Option<String>,
    pub max_output_tokens: u32,
    pub temperature: f32,
}

impl PromptRequest {
    pub fn new(
        tier: Tier,
        system_prompt: impl Into<String>,
        max_output_tokens: u32,
        temperature: f32,
    ) -> Result<Self, LlmError> {
        let system_prompt = system_prompt.into();
        if system_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("system prompt is empty".into()));
        }
        if max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("invalid temperature {temperature}")));
        }
        Ok(Self {
            tier,
            system_prompt,
            history: Vec::new(),
            user_prompt: None,
            max_output_tokens,
            temperature,
        })
    }

    pub fn with_history(mut self, history: Vec<Turn>) -> Self {
        self.history = history;
        self
    }

    pub fn with_user_prompt(mut self, user_prompt: impl Into<String>) -> Self {
        self.user_prompt = Some(user_prompt.into());
        self
    }

    /// The conversation as chat messages: system, history, then the user prompt.
    pub fn messages(&self) -> Vec<(&'static str, &str)> {
        let mut out = vec![("system", self.system_prompt.as_str())];
        for turn in &self.history {
            let role = match turn.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push((role, turn.content.as_str()));
        }
        if let Some(user) = &self.user_prompt {
            out.push(("user", user.as_str()));
        }
        out
    }
}

/// Stable SHA-256 over the tier and all message text of a request.
pub fn prompt_hash(request: &PromptRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(match request.tier {
        Tier::Assessment => b"assessment".as_slice(),
        Tier::Lightweight => b"lightweight".as_slice(),
    });
    for (role, content) in request.messages() {
        hasher.update([0u8]);
        hasher.update(role.as_bytes());
        hasher.update([0u8]);
        hasher.update(content.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u32,
    pub output: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub token_usage: TokenUsage,
    pub provider_id: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("model provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("model returned an empty response")]
    ResponseEmpty,
    #[error("prompt needs ~{needed} tokens but the context budget is {budget}")]
    TooLong { needed: usize, budget: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl LlmError {
    fn is_retryable(&self) -> bool {
        matches!(self, Self::ProviderUnavailable(_) | Self::ResponseEmpty)
    }
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> &str;

    async fn complete(&self, model: &str, request: &PromptRequest) -> Result<ModelResponse, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub assessment_model: String,
    pub lightweight_model: String,
    pub assessment_temperature: f32,
    pub chat_temperature: f32,
    pub suggestion_temperature: f32,
    pub assessment_max_tokens: u32,
    pub chat_max_tokens: u32,
    pub suggestion_max_tokens: u32,
    pub context_budget_tokens: usize,
    pub timeout_secs: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            assessment_model: "gpt-4o".into(),
            lightweight_model: "gpt-4o-mini".into(),
            assessment_temperature: 0.0,
            chat_temperature: 0.0,
            suggestion_temperature: 0.7,
            assessment_max_tokens: 1200,
            chat_max_tokens: 700,
            suggestion_max_tokens: 200,
            context_budget_tokens: 120_000,
            timeout_secs: 90,
        }
    }
}

impl GatewayConfig {
    pub fn model_for(&self, tier: Tier) -> &str {
        match tier {
            Tier::Assessment => &self.assessment_model,
            Tier::Lightweight => &self.lightweight_model,
        }
    }
}

/// Routes requests to the configured model per tier and retries transient
/// failures once.
pub struct LlmGateway {
    provider: Arc<dyn CompletionProvider>,
    config: GatewayConfig,
    renderer: PromptRenderer,
}

impl LlmGateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, config: GatewayConfig) -> Self {
        Self::with_templates(provider, config, TemplateSet::english())
    }

    pub fn with_templates(
        provider: Arc<dyn CompletionProvider>,
        config: GatewayConfig,
        templates: TemplateSet,
    ) -> Self {
        let renderer = PromptRenderer::new(templates, config.context_budget_tokens);
        Self {
            provider,
            config,
            renderer,
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn renderer(&self) -> &PromptRenderer {
        &self.renderer
    }

    pub async fn complete(&self, request: &PromptRequest) -> Result<ModelResponse, LlmError> {
        match self.attempt(request).await {
            Err(e) if e.is_retryable() => {
                tracing::warn!(error = %e, "model call failed, retrying once");
                self.attempt(request).await
            }
            other => other,
        }
    }

    async fn attempt(&self, request: &PromptRequest) -> Result<ModelResponse, LlmError> {
        let model = self.config.model_for(request.tier);
        let timeout = Duration::from_secs(self.config.timeout_secs);
        let response = tokio::time::timeout(timeout, self.provider.complete(model, request))
            .await
            .map_err(|_| LlmError::ProviderUnavailable("timed out".into()))??;
        if response.text.trim().is_empty() {
            return Err(LlmError::ResponseEmpty);
        }
        Ok(response)
    }
}
