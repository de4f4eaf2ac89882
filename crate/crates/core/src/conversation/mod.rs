//! Per-domain chat threads, follow-up suggestions and cross-site carryover.
//!
//! Each domain has one general thread and one thread per assessed criterion.
//! The last question asked in a scope is remembered globally and offered as
//! the first suggestion when the same scope is opened on another site.

mod suggestions;

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use suggestions::{parse_numbered_list, question_key, FallbackQuestions};

use crate::acquisition::PolicyDocument;
use crate::assessment::PolicyAssessment;
use crate::clock::{Clock, SystemClock};
use crate::llm::{estimate_tokens, LlmError, LlmGateway, PromptRequest, Role, Tier, Turn, UserSettings};
use crate::store::{Store, StoreError};

/// Number of suggestions produced per call.
pub const SUGGESTION_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatScope {
    General,
    Criterion(String),
}

impl ChatScope {
    pub fn criterion(name: impl Into<String>) -> Self {
        Self::Criterion(name.into())
    }

    /// Storage key. Criterion names compare case- and whitespace-insensitively,
    /// so "Data  Minimization" on one site matches "data minimization" on another.
    pub fn key(&self) -> String {
        match self {
            Self::General => "general".into(),
            Self::Criterion(name) => format!("criterion:{}", question_key(name)),
        }
    }

    pub fn criterion_name(&self) -> Option<&str> {
        match self {
            Self::General => None,
            Self::Criterion(name) => Some(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    pub at: DateTime<Utc>,
}

impl ChatMessage {
    pub fn new(role: Role, text: impl Into<String>, at: DateTime<Utc>) -> Self {
        Self {
            role,
            text: text.into(),
            at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatThread {
    pub domain: String,
    pub scope: ChatScope,
    pub messages: Vec<ChatMessage>,
    /// Either empty or exactly [`SUGGESTION_COUNT`] questions.
    #[serde(default)]
    pub suggestions: Vec<String>,
}

impl ChatThread {
    pub fn new(domain: impl Into<String>, scope: ChatScope) -> Self {
        Self {
            domain: domain.into(),
            scope,
            messages: Vec::new(),
            suggestions: Vec::new(),
        }
    }

    pub fn asked_questions(&self) -> Vec<String> {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.text.clone())
            .collect()
    }

    pub fn turns(&self) -> Vec<Turn> {
        self.messages
            .iter()
            .map(|m| Turn::new(m.role, m.text.clone()))
            .collect()
    }

    /// Roles alternate, starting with the user, and the thread ends on an answer.
    pub fn is_well_formed(&self) -> bool {
        self.messages.len().is_multiple_of(2)
            && self.messages.iter().enumerate().all(|(i, m)| {
                let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
                m.role == expected && !m.text.trim().is_empty()
            })
            && (self.suggestions.is_empty() || self.suggestions.len() == SUGGESTION_COUNT)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChatError {
    #[error("{0} has no usable assessment yet")]
    NotAssessed(String),
    #[error("{domain} has no criterion named {name:?}")]
    UnknownCriterion { domain: String, name: String },
    #[error("question is empty")]
    EmptyQuestion,
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl From<StoreError> for ChatError {
    fn from(e: StoreError) -> Self {
        Self::Storage(e.to_string())
    }
}

/// Domain and scope key of one thread.
type ThreadKey = (String, String);

/// Chat operations over the store and the model gateway.
pub struct Conversation {
    store: Arc<Store>,
    gateway: Arc<LlmGateway>,
    fallback: FallbackQuestions,
    clock: Arc<dyn Clock>,
    locks: Mutex<HashMap<ThreadKey, Arc<tokio::sync::Mutex<()>>>>,
}

impl Conversation {
    pub fn new(store: Arc<Store>, gateway: Arc<LlmGateway>) -> Self {
        Self {
            store,
            gateway,
            fallback: FallbackQuestions::default(),
            clock: Arc::new(SystemClock),
            locks: Mutex::default(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_fallback(mut self, fallback: FallbackQuestions) -> Self {
        self.fallback = fallback;
        self
    }

    /// The stored thread, or an empty one.
    pub fn thread(&self, domain: &str, scope: &ChatScope) -> Result<ChatThread, ChatError> {
        Ok(self
            .store
            .get_thread(domain, scope)?
            .unwrap_or_else(|| ChatThread::new(domain, scope.clone())))
    }

    /// Answers `question` in the given thread. Both turns are stored together
    /// or not at all, so a failed call leaves the thread as it was.
    pub async fn ask(
        &self,
        domain: &str,
        scope: &ChatScope,
        question: &str,
        settings: UserSettings,
    ) -> Result<String, ChatError> {
        let question = question.trim();
        if question.is_empty() {
            return Err(ChatError::EmptyQuestion);
        }
        let (assessment, policy) = self.context(domain)?;
        let scope = canonical_scope(&assessment, scope)?;

        let lock = self.lock_for(domain, &scope);
        let _guard = lock.lock().await;

        let mut thread = self.thread(domain, &scope)?;
        let history = thread.turns();
        let reserve = history.iter().map(|t| estimate_tokens(&t.content)).sum::<usize>()
            + estimate_tokens(question)
            + self.gateway.config().chat_max_tokens as usize;
        let system = self.gateway.renderer().render_chat_prompt(
            &policy,
            &rating_context(&assessment, &scope),
            settings,
            reserve,
        )?;
        let config = self.gateway.config();
        let request = PromptRequest::new(
            Tier::Assessment,
            system.text,
            config.chat_max_tokens,
            config.chat_temperature,
        )?
        .with_history(history)
        .with_user_prompt(question);
        let answer = self.gateway.complete(&request).await?.text.trim().to_string();

        let now = self.clock.now();
        thread.messages.push(ChatMessage::new(Role::User, question, now));
        thread
            .messages
            .push(ChatMessage::new(Role::Assistant, answer.clone(), now));
        thread.suggestions.clear();
        self.store.put_thread(&thread)?;
        self.store.put_carryover(&scope, question)?;
        Ok(answer)
    }

    /// Exactly three distinct follow-up questions, none already asked in the
    /// thread. The result is also stored on the thread.
    ///
    /// A short or repetitive model answer is retried once, then padded from
    /// the fallback table. A failed model call falls back entirely.
    pub async fn suggest(&self, domain: &str, scope: &ChatScope) -> Result<Vec<String>, ChatError> {
        let (assessment, _) = self.context(domain)?;
        let scope = canonical_scope(&assessment, scope)?;
        let thread = self.thread(domain, &scope)?;
        let asked = thread.asked_questions();

        let mut picked = Picker::new(&asked);
        if thread.messages.is_empty() {
            if let Some(carried) = self.store.get_carryover(&scope)? {
                picked.offer(&carried);
            }
        }

        if let Err(e) = self.generate(&mut picked, &scope, &thread).await {
            tracing::warn!(domain, scope = %scope.key(), error = %e, "suggestion call failed, using fallback questions");
        }
        for q in self.fallback.candidates(scope.criterion_name()) {
            if picked.is_full() {
                break;
            }
            picked.offer(&q);
        }
        let suggestions = picked.into_vec();

        // Store under the thread lock; a concurrent ask may have added
        // questions in the meantime, in which case the ask's reset wins.
        let lock = self.lock_for(domain, &scope);
        let _guard = lock.lock().await;
        let mut current = self.thread(domain, &scope)?;
        if current.messages.len() == thread.messages.len() {
            current.suggestions = suggestions.clone();
            self.store.put_thread(&current)?;
        }
        Ok(suggestions)
    }

    /// Removes every thread of `domain`. Carryover and assessments stay.
    pub fn clear_history(&self, domain: &str) -> Result<usize, ChatError> {
        Ok(self.store.delete_threads(domain)?)
    }

    async fn generate(&self, picked: &mut Picker, scope: &ChatScope, thread: &ChatThread) -> Result<(), LlmError> {
        let asked = thread.asked_questions();
        let (system, user) =
            self.gateway
                .renderer()
                .render_suggestion_prompt(scope.criterion_name(), &thread.turns(), &asked)?;
        let config = self.gateway.config();
        let request = PromptRequest::new(
            Tier::Lightweight,
            system,
            config.suggestion_max_tokens,
            config.suggestion_temperature,
        )?
        .with_user_prompt(user);

        for attempt in 0..2 {
            let reply = self.gateway.complete(&request).await?;
            let mut fresh = 0;
            for q in parse_numbered_list(&reply.text) {
                if picked.offer(&q) {
                    fresh += 1;
                }
            }
            if picked.is_full() {
                return Ok(());
            }
            tracing::debug!(attempt, fresh, "suggestion answer fell short");
        }
        Ok(())
    }

    fn context(&self, domain: &str) -> Result<(PolicyAssessment, PolicyDocument), ChatError> {
        let assessment = self
            .store
            .get_assessment(domain)?
            .ok_or_else(|| ChatError::NotAssessed(domain.to_string()))?;
        let policy = self
            .store
            .get_policy(domain)?
            .filter(PolicyDocument::is_ok)
            .ok_or_else(|| ChatError::NotAssessed(domain.to_string()))?;
        Ok((assessment, policy))
    }

    fn lock_for(&self, domain: &str, scope: &ChatScope) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().unwrap();
        Arc::clone(locks.entry((domain.to_string(), scope.key())).or_default())
    }
}

/// Replaces a criterion scope by the assessment's own spelling of the name.
fn canonical_scope(assessment: &PolicyAssessment, scope: &ChatScope) -> Result<ChatScope, ChatError> {
    match scope {
        ChatScope::General => Ok(ChatScope::General),
        ChatScope::Criterion(name) => assessment
            .criterion(name)
            .map(|c| ChatScope::Criterion(c.display_name()))
            .ok_or_else(|| ChatError::UnknownCriterion {
                domain: assessment.domain.clone(),
                name: name.clone(),
            }),
    }
}

/// Rating text for the chat prompt: one criterion for a criteria chat,
/// the overall result and every criterion for the general chat.
pub fn rating_context(assessment: &PolicyAssessment, scope: &ChatScope) -> String {
    match scope.criterion_name().and_then(|n| assessment.criterion(n)) {
        Some(c) => format!(
            "{}: {}/5 ({}). {}",
            c.display_name(),
            c.score.get(),
            c.color,
            c.justification.trim()
        ),
        None => {
            let items: Vec<String> = assessment
                .criteria
                .iter()
                .map(|c| format!("{}: {}/5", c.display_name(), c.score.get()))
                .collect();
            format!(
                "overall {} (average {:.2}); {}",
                assessment.overall,
                assessment.average,
                items.join("; ")
            )
        }
    }
}

/// Collects up to three distinct questions, skipping already asked ones.
struct Picker {
    seen: HashSet<String>,
    out: Vec<String>,
}

impl Picker {
    fn new(asked: &[String]) -> Self {
        Self {
            seen: asked.iter().map(|q| question_key(q)).collect(),
            out: Vec::with_capacity(SUGGESTION_COUNT),
        }
    }

    fn offer(&mut self, question: &str) -> bool {
        let question = question.trim();
        if self.is_full() || question.is_empty() || !self.seen.insert(question_key(question)) {
            return false;
        }
        self.out.push(question.to_string());
        true
    }

    fn is_full(&self) -> bool {
        self.out.len() >= SUGGESTION_COUNT
    }

    fn into_vec(self) -> Vec<String> {
        self.out
    }
}
