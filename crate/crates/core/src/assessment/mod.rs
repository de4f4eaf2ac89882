//! From raw model output to criterion ratings and traffic-light colors.

mod parse;
mod report;
mod score;

use std::ops::RangeInclusive;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use parse::{parse_assessment, ParseFailure, ParsedAssessment, ParsedCriterion};
pub use report::ranking_report;
pub use score::{score_criterion, score_overall, LikertScore, ScoreError, TrafficColor};

use crate::acquisition::PolicyDocument;
use crate::clock::{Clock, SystemClock};
use crate::llm::{LlmError, LlmGateway, PromptRequest, Tier, FORMAT_REMINDER};

/// Accepted number of criteria in one assessment.
pub const CRITERIA_BOUNDS: RangeInclusive<usize> = 3..=12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionRating {
    /// As written by the model.
    pub name: String,
    pub score: LikertScore,
    pub justification: String,
    pub color: TrafficColor,
}

impl CriterionRating {
    pub fn new(name: impl Into<String>, score: LikertScore, justification: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            score,
            justification: justification.into(),
            color: score_criterion(score),
        }
    }

    /// Name with runs of whitespace collapsed, for display.
    pub fn display_name(&self) -> String {
        self.name.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAssessment {
    pub domain: String,
    pub criteria: Vec<CriterionRating>,
    pub average: f64,
    pub overall: TrafficColor,
    pub raw_response: String,
    pub created_at: DateTime<Utc>,
    pub model_id: String,
    /// The policy text was cut to fit the context budget.
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PolicyAssessment {
    /// Builds an assessment, deriving every color and the average.
    pub fn from_ratings(
        domain: impl Into<String>,
        criteria: Vec<CriterionRating>,
        raw_response: impl Into<String>,
        model_id: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Self, ScoreError> {
        let scores: Vec<LikertScore> = criteria.iter().map(|c| c.score).collect();
        let (average, overall) = score_overall(&scores)?;
        Ok(Self {
            domain: domain.into(),
            criteria,
            average,
            overall,
            raw_response: raw_response.into(),
            created_at,
            model_id: model_id.into(),
            truncated: false,
            warnings: Vec::new(),
        })
    }

    /// Red criteria, in assessment order.
    pub fn pressing_issues(&self) -> Vec<&CriterionRating> {
        self.criteria.iter().filter(|c| c.color == TrafficColor::Red).collect()
    }

    /// Exact-name lookup, falling back to whitespace- and case-insensitive.
    pub fn criterion(&self, name: &str) -> Option<&CriterionRating> {
        let key = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        self.criteria
            .iter()
            .find(|c| c.name == name)
            .or_else(|| self.criteria.iter().find(|c| key(&c.name) == key(name)))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssessError {
    #[error("policy cannot be assessed: {0}")]
    NotAssessable(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("assessment unavailable after retry: {}", diagnostics.join("; "))]
    Unavailable { diagnostics: Vec<String> },
}

/// Runs the assessment prompt and turns the answer into a [`PolicyAssessment`].
pub struct Assessor {
    gateway: Arc<LlmGateway>,
    clock: Arc<dyn Clock>,
}

impl Assessor {
    pub fn new(gateway: Arc<LlmGateway>) -> Self {
        Self {
            gateway,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// One model call, plus one retry with a format reminder if the answer
    /// has no usable ratings.
    pub async fn assess(&self, policy: &PolicyDocument) -> Result<PolicyAssessment, AssessError> {
        if !policy.is_ok() {
            return Err(AssessError::NotAssessable(format!(
                "acquisition status is {}",
                policy.status.as_str()
            )));
        }
        let prompt = self
            .gateway
            .renderer()
            .render_assessment_prompt(policy)
            .map_err(|e| match e {
                LlmError::InvalidRequest(msg) => AssessError::NotAssessable(msg),
                other => AssessError::Provider(other),
            })?;

        let mut diagnostics = Vec::new();
        for attempt in 0..2 {
            let system = if attempt == 0 {
                prompt.text.clone()
            } else {
                format!("{}{}", prompt.text, FORMAT_REMINDER)
            };
            let config = self.gateway.config();
            let request = PromptRequest::new(
                Tier::Assessment,
                system,
                config.assessment_max_tokens,
                config.assessment_temperature,
            )?;
            let response = self.gateway.complete(&request).await?;
            match validate(parse_assessment(&response.text)) {
                Ok(parsed) => {
                    let criteria = parsed
                        .criteria
                        .into_iter()
                        .map(|c| CriterionRating::new(c.name, c.score, c.justification))
                        .collect();
                    let mut assessment = PolicyAssessment::from_ratings(
                        &policy.domain,
                        criteria,
                        response.text,
                        response.model_id,
                        self.clock.now(),
                    )
                    .expect("validated assessments have at least one criterion");
                    assessment.truncated = prompt.truncated;
                    assessment.warnings = parsed.warnings;
                    return Ok(assessment);
                }
                Err(failure) => {
                    tracing::warn!(domain = %policy.domain, attempt, "assessment output not parseable");
                    diagnostics.extend(
                        failure
                            .diagnostics
                            .into_iter()
                            .map(|d| format!("attempt {}: {d}", attempt + 1)),
                    );
                }
            }
        }
        Err(AssessError::Unavailable { diagnostics })
    }
}

fn validate(parsed: Result<ParsedAssessment, ParseFailure>) -> Result<ParsedAssessment, ParseFailure> {
    let parsed = parsed?;
    let n = parsed.criteria.len();
    if CRITERIA_BOUNDS.contains(&n) {
        Ok(parsed)
    } else {
        let mut diagnostics = parsed.warnings;
        diagnostics.push(format!(
            "{n} criteria found, expected {} to {}",
            CRITERIA_BOUNDS.start(),
            CRITERIA_BOUNDS.end()
        ));
        Err(ParseFailure { diagnostics })
    }
}
