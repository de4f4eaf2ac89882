//! Scripted, deterministic provider for tests and offline demos.
//!
//! A reply is chosen in this order: exact prompt hash, call step index (the
//! zero-based number of the call across all tiers), the first matching rule
//! that still has uses left, then the default reply. Every call is recorded.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::Deserialize;

use super::{prompt_hash, CompletionProvider, LlmError, ModelResponse, PromptRequest, Tier, TokenUsage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFailure {
    /// Surfaces as [`LlmError::ProviderUnavailable`].
    Unavailable,
    /// Surfaces as [`LlmError::ResponseEmpty`].
    Empty,
    /// Surfaces as [`LlmError::InvalidRequest`].
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Text(String),
    Fail(MockFailure),
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self::Text(text.into())
    }
}

/// Replies when every given condition holds.
#[derive(Debug, Clone)]
pub struct MockRule {
    tier: Option<Tier>,
    contains: Option<String>,
    remaining: Option<usize>,
    reply: MockReply,
}

impl MockRule {
    pub fn any(reply: MockReply) -> Self {
        Self {
            tier: None,
            contains: None,
            remaining: None,
            reply,
        }
    }

    /// Matches requests whose messages contain `needle`.
    pub fn containing(needle: impl Into<String>, reply: MockReply) -> Self {
        Self {
            contains: Some(needle.into()),
            ..Self::any(reply)
        }
    }

    pub fn tier(mut self, tier: Tier) -> Self {
        self.tier = Some(tier);
        self
    }

    /// Stop matching after `n` uses.
    pub fn times(mut self, n: usize) -> Self {
        self.remaining = Some(n);
        self
    }

    fn matches(&self, request: &PromptRequest) -> bool {
        if self.remaining == Some(0) {
            return false;
        }
        if self.tier.is_some_and(|t| t != request.tier) {
            return false;
        }
        match &self.contains {
            Some(needle) => request
                .messages()
                .iter()
                .any(|(_, content)| content.contains(needle.as_str())),
            None => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecordedCall {
    pub step: usize,
    pub model: String,
    pub request: PromptRequest,
    pub hash: String,
}

#[derive(Default)]
struct Script {
    by_hash: HashMap<String, MockReply>,
    by_step: HashMap<usize, MockReply>,
    rules: Vec<MockRule>,
    default: Option<MockReply>,
    calls: Vec<RecordedCall>,
}

#[derive(Default)]
pub struct MockProvider {
    script: Mutex<Script>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading scenario file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing scenario file {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("scenario file {path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Deserialize)]
struct ScenarioFile {
    #[serde(default)]
    reply: Vec<ScenarioEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioEntry {
    step: Option<usize>,
    prompt_hash: Option<String>,
    contains: Option<String>,
    tier: Option<Tier>,
    times: Option<usize>,
    #[serde(default)]
    default: bool,
    text: Option<String>,
    fail: Option<MockFailure>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.toml` file in `dir`, in file-name order.
    ///
    /// ```toml
    /// [[reply]]
    /// step = 0
    /// text = "Transparency: 3/5 ..."
    ///
    /// [[reply]]
    /// tier = "lightweight"
    /// contains = "Transparency"
    /// text = "1. A? 2. B? 3. C?"
    ///
    /// [[reply]]
    /// prompt_hash = "3f1c..."
    /// fail = "unavailable"
    /// ```
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let dir = dir.as_ref();
        let io = |source| ScenarioError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "toml"))
            .collect();
        files.sort();

        let provider = Self::new();
        for path in files {
            let source = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            provider.load_scenario(&source).map_err(|e| match e {
                ScenarioError::Parse { source, .. } => ScenarioError::Parse {
                    path: path.display().to_string(),
                    source,
                },
                ScenarioError::Invalid { message, .. } => ScenarioError::Invalid {
                    path: path.display().to_string(),
                    message,
                },
                other => other,
            })?;
        }
        Ok(provider)
    }

    /// Adds the entries of one scenario document.
    pub fn load_scenario(&self, source: &str) -> Result<(), ScenarioError> {
        let file: ScenarioFile = toml::from_str(source).map_err(|source| ScenarioError::Parse {
            path: "<inline>".into(),
            source,
        })?;
        let invalid = |message: &str| ScenarioError::Invalid {
            path: "<inline>".into(),
            message: message.into(),
        };
        let mut script = self.script.lock().unwrap();
        for entry in file.reply {
            let reply = match (entry.text, entry.fail) {
                (Some(text), None) => MockReply::Text(text),
                (None, Some(fail)) => MockReply::Fail(fail),
                _ => return Err(invalid("each reply needs exactly one of `text` or `fail`")),
            };
            if let Some(hash) = entry.prompt_hash {
                script.by_hash.insert(hash, reply);
            } else if let Some(step) = entry.step {
                script.by_step.insert(step, reply);
            } else if entry.default {
                script.default = Some(reply);
            } else {
                script.rules.push(MockRule {
                    tier: entry.tier,
                    contains: entry.contains,
                    remaining: entry.times,
                    reply,
                });
            }
        }
        Ok(())
    }

    pub fn with_rule(self, rule: MockRule) -> Self {
        self.push_rule(rule);
        self
    }

    pub fn with_default_reply(self, text: impl Into<String>) -> Self {
        self.script.lock().unwrap().default = Some(MockReply::Text(text.into()));
        self
    }

    pub fn push_rule(&self, rule: MockRule) {
        self.script.lock().unwrap().rules.push(rule);
    }

    pub fn on_step(&self, step: usize, reply: MockReply) {
        self.script.lock().unwrap().by_step.insert(step, reply);
    }

    pub fn on_hash(&self, hash: impl Into<String>, reply: MockReply) {
        self.script.lock().unwrap().by_hash.insert(hash.into(), reply);
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.script.lock().unwrap().calls.clone()
    }

    pub fn call_count(&self, tier: Tier) -> usize {
        self.script
            .lock()
            .unwrap()
            .calls
            .iter()
            .filter(|c| c.request.tier == tier)
            .count()
    }

    pub fn last_call(&self, tier: Tier) -> Option<RecordedCall> {
        self.script
            .lock()
            .unwrap()
            .calls
            .iter()
            .rev()
            .find(|c| c.request.tier == tier)
            .cloned()
    }

    pub fn clear_calls(&self) {
        self.script.lock().unwrap().calls.clear();
    }

    fn pick(script: &mut Script, request: &PromptRequest, hash: &str, step: usize) -> Option<MockReply> {
        if let Some(reply) = script.by_hash.get(hash) {
            return Some(reply.clone());
        }
        if let Some(reply) = script.by_step.get(&step) {
            return Some(reply.clone());
        }
        if let Some(rule) = script.rules.iter_mut().find(|r| r.matches(request)) {
            if let Some(n) = rule.remaining.as_mut() {
                *n -= 1;
            }
            return Some(rule.reply.clone());
        }
        script.default.clone()
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    async fn complete(&self, model: &str, request: &PromptRequest) -> Result<ModelResponse, LlmError> {
        let hash = prompt_hash(request);
        let reply = {
            let mut script = self.script.lock().unwrap();
            let step = script.calls.len();
            script.calls.push(RecordedCall {
                step,
                model: model.to_string(),
                request: request.clone(),
                hash: hash.clone(),
            });
            Self::pick(&mut script, request, &hash, step)
        };
        match reply {
            Some(MockReply::Text(text)) => {
                let input = request
                    .messages()
                    .iter()
                    .map(|(_, c)| c.split_whitespace().count())
                    .sum::<usize>();
                Ok(ModelResponse {
                    token_usage: TokenUsage {
                        input: input as u32,
                        output: text.split_whitespace().count() as u32,
                    },
                    text,
                    provider_id: "mock".into(),
                    model_id: model.to_string(),
                })
            }
            Some(MockReply::Fail(MockFailure::Unavailable)) => {
                Err(LlmError::ProviderUnavailable("mock: scripted outage".into()))
            }
            Some(MockReply::Fail(MockFailure::Empty)) => Err(LlmError::ResponseEmpty),
            Some(MockReply::Fail(MockFailure::Rejected)) => {
                Err(LlmError::InvalidRequest("mock: scripted rejection".into()))
            }
            None => Err(LlmError::ProviderUnavailable(format!(
                "mock: no scripted reply for prompt {hash}"
            ))),
        }
    }
}
