//! JSON request and response bodies of the v1 API.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::acquisition::PolicyDocument;
use crate::assessment::TrafficColor;
use crate::conversation::{ChatScope, ChatThread};
use crate::llm::UserSettings;
use crate::store::{CacheOutcome, EventKind};

pub const API_VERSION: &str = "v1";

/// `status` value for a policy that was fetched but could not be rated.
pub const STATUS_ASSESSMENT_UNAVAILABLE: &str = "assessment_unavailable";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessRequest {
    pub page_url: String,
    /// Skips link discovery when the client already knows the policy URL.
    #[serde(default)]
    pub policy_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionView {
    pub name: String,
    pub score: u8,
    pub color: TrafficColor,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessResponse {
    pub domain: String,
    /// `ok`, an acquisition failure status, or `assessment_unavailable`.
    pub status: String,
    pub overall_color: TrafficColor,
    pub average: Option<f64>,
    pub criteria: Vec<CriterionView>,
    pub pressing_issues: Vec<String>,
    pub policy_word_count: usize,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl From<&CacheOutcome> for AssessResponse {
    fn from(outcome: &CacheOutcome) -> Self {
        let failed = |status: &str, diagnostics: Vec<String>| Self {
            domain: outcome.domain().to_string(),
            status: status.to_string(),
            overall_color: TrafficColor::Unknown,
            average: None,
            criteria: Vec::new(),
            pressing_issues: Vec::new(),
            policy_word_count: 0,
            truncated: false,
            diagnostics,
        };
        match outcome {
            CacheOutcome::Assessed {
                assessment,
                policy_word_count,
            } => Self {
                domain: assessment.domain.clone(),
                status: "ok".into(),
                overall_color: assessment.overall,
                average: Some(assessment.average),
                criteria: assessment
                    .criteria
                    .iter()
                    .map(|c| CriterionView {
                        name: c.display_name(),
                        score: c.score.get(),
                        color: c.color,
                        justification: c.justification.clone(),
                    })
                    .collect(),
                pressing_issues: assessment.pressing_issues().iter().map(|c| c.display_name()).collect(),
                policy_word_count: *policy_word_count,
                truncated: assessment.truncated,
                diagnostics: assessment.warnings.clone(),
            },
            CacheOutcome::AcquisitionFailed { status, diagnostic, .. } => {
                failed(status.as_str(), diagnostic.iter().cloned().collect())
            }
            CacheOutcome::AssessmentUnavailable { diagnostics, .. } => {
                failed(STATUS_ASSESSMENT_UNAVAILABLE, diagnostics.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub domain: String,
    #[serde(default = "general")]
    pub scope: ChatScope,
    pub question: String,
    /// Overrides the stored settings for this one question.
    #[serde(default)]
    pub settings: Option<UserSettings>,
}

fn general() -> ChatScope {
    ChatScope::General
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub answer: String,
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionsQuery {
    pub domain: String,
    /// Criterion name; the general chat when absent.
    #[serde(default)]
    pub criterion: Option<String>,
}

impl SuggestionsQuery {
    pub fn scope(&self) -> ChatScope {
        match &self.criterion {
            Some(name) if !name.trim().is_empty() => ChatScope::criterion(name.trim()),
            _ => ChatScope::General,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionsResponse {
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainQuery {
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTextResponse {
    pub domain: String,
    pub source_url: String,
    pub status: String,
    pub word_count: usize,
    pub text: String,
}

impl From<&PolicyDocument> for PolicyTextResponse {
    fn from(doc: &PolicyDocument) -> Self {
        Self {
            domain: doc.domain.clone(),
            source_url: doc.source_url.clone(),
            status: doc.status.as_str().to_string(),
            word_count: doc.word_count,
            text: doc.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub domain: String,
    pub threads: Vec<ChatThread>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRequest {
    pub kind: EventKind,
    #[serde(default)]
    pub payload: BTreeMap<String, serde_json::Value>,
    /// Defaults to the time the service received the event.
    #[serde(default)]
    pub at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
