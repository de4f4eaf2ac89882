//! Domain-keyed assessment cache with request coalescing.
//!
//! Successful assessments are kept until invalidated. Domain-level failures
//! (no policy, unusable model output) are remembered for a short time so a
//! broken site is not refetched on every page view. Concurrent misses for
//! one domain share a single pipeline run.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use futures::future::{BoxFuture, FutureExt, Shared};
use url::Url;

use super::{content_hash, Store, StoreError};
use crate::acquisition::{AcquisitionStatus, PolicyAcquirer, PolicyDocument};
use crate::assessment::{AssessError, Assessor, PolicyAssessment};
use crate::clock::Clock;
use crate::domain::registrable_domain;
use crate::llm::LlmError;

#[derive(Debug, Clone, PartialEq)]
pub enum CacheOutcome {
    Assessed {
        assessment: Arc<PolicyAssessment>,
        policy_word_count: usize,
    },
    AcquisitionFailed {
        domain: String,
        status: AcquisitionStatus,
        diagnostic: Option<String>,
    },
    AssessmentUnavailable {
        domain: String,
        diagnostics: Vec<String>,
    },
}

impl CacheOutcome {
    pub fn domain(&self) -> &str {
        match self {
            Self::Assessed { assessment, .. } => &assessment.domain,
            Self::AcquisitionFailed { domain, .. } | Self::AssessmentUnavailable { domain, .. } => domain,
        }
    }

    pub fn assessment(&self) -> Option<&PolicyAssessment> {
        match self {
            Self::Assessed { assessment, .. } => Some(assessment),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("not an absolute http(s) URL with a host: {0}")]
    InvalidUrl(String),
    #[error("no stored policy for {0}")]
    UnknownDomain(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl From<StoreError> for PipelineError {
    fn from(e: StoreError) -> Self {
        Self::Storage(e.to_string())
    }
}

type PipelineResult = Result<CacheOutcome, PipelineError>;
type InFlight = Shared<BoxFuture<'static, PipelineResult>>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Normal lookup: reuse anything stored.
    Lookup,
    /// Refetch the policy and reassess only if its text changed.
    Recheck,
}

pub struct AssessmentCache {
    store: Arc<Store>,
    acquirer: Arc<PolicyAcquirer>,
    assessor: Arc<Assessor>,
    clock: Arc<dyn Clock>,
    negative_ttl: Duration,
    negative: Mutex<HashMap<String, (DateTime<Utc>, CacheOutcome)>>,
    inflight: Mutex<HashMap<String, InFlight>>,
}

impl AssessmentCache {
    pub const DEFAULT_NEGATIVE_TTL_MINUTES: i64 = 10;

    pub fn new(
        store: Arc<Store>,
        acquirer: Arc<PolicyAcquirer>,
        assessor: Arc<Assessor>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            store,
            acquirer,
            assessor,
            clock,
            negative_ttl: Duration::minutes(Self::DEFAULT_NEGATIVE_TTL_MINUTES),
            negative: Mutex::default(),
            inflight: Mutex::default(),
        }
    }

    pub fn with_negative_ttl(mut self, ttl: Duration) -> Self {
        self.negative_ttl = ttl;
        self
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    /// Returns the stored assessment for the page's domain, or runs
    /// acquisition and assessment once and stores the result.
    ///
    /// `policy_url`, when given, skips link discovery.
    pub async fn get_or_assess(self: &Arc<Self>, page_url: &Url, policy_url: Option<&Url>) -> PipelineResult {
        let domain = registrable_domain(page_url)
            .filter(|d| !d.is_empty())
            .ok_or_else(|| PipelineError::InvalidUrl(page_url.to_string()))?;
        if let Some(hit) = self.cached(&domain)? {
            return Ok(hit);
        }
        let target = Target {
            page_url: page_url.clone(),
            policy_url: policy_url.cloned(),
        };
        self.coalesced(domain, target, Mode::Lookup).await
    }

    /// Refetches the stored policy of `domain` and reassesses it if its text
    /// changed (or if there was no usable assessment before).
    pub async fn reassess(self: &Arc<Self>, domain: &str) -> PipelineResult {
        let policy = self
            .store
            .get_policy(domain)?
            .ok_or_else(|| PipelineError::UnknownDomain(domain.to_string()))?;
        let source =
            Url::parse(&policy.source_url).map_err(|_| PipelineError::InvalidUrl(policy.source_url.clone()))?;
        let target = if policy.is_ok() {
            Target {
                page_url: source.clone(),
                policy_url: Some(source),
            }
        } else {
            Target {
                page_url: source,
                policy_url: None,
            }
        };
        self.negative.lock().unwrap().remove(domain);
        self.coalesced(domain.to_string(), target, Mode::Recheck).await
    }

    /// Drops the stored assessment and any negative entry for `domain`.
    pub fn invalidate(&self, domain: &str) -> Result<(), StoreError> {
        self.negative.lock().unwrap().remove(domain);
        self.store.delete_assessment(domain)
    }

    pub fn in_flight(&self) -> usize {
        self.inflight.lock().unwrap().len()
    }

    fn cached(&self, domain: &str) -> Result<Option<CacheOutcome>, PipelineError> {
        if let Some(assessment) = self.store.get_assessment(domain)? {
            let words = self.store.get_policy(domain)?.map_or(0, |p| p.word_count);
            return Ok(Some(CacheOutcome::Assessed {
                assessment: Arc::new(assessment),
                policy_word_count: words,
            }));
        }
        let mut negative = self.negative.lock().unwrap();
        if let Some((expires, outcome)) = negative.get(domain) {
            if self.clock.now() < *expires {
                return Ok(Some(outcome.clone()));
            }
            negative.remove(domain);
        }
        Ok(None)
    }

    async fn coalesced(self: &Arc<Self>, domain: String, target: Target, mode: Mode) -> PipelineResult {
        let shared = {
            let mut inflight = self.inflight.lock().unwrap();
            match inflight.get(&domain) {
                Some(running) => running.clone(),
                None => {
                    let this = Arc::clone(self);
                    let key = domain.clone();
                    let fut = async move {
                        let result = this.run(&key, &target, mode).await;
                        this.inflight.lock().unwrap().remove(&key);
                        result
                    }
                    .boxed()
                    .shared();
                    inflight.insert(domain.clone(), fut.clone());
                    fut
                }
            }
        };
        shared.await
    }

    async fn run(&self, domain: &str, target: &Target, mode: Mode) -> PipelineResult {
        if mode == Mode::Lookup {
            if let Some(hit) = self.cached(domain)? {
                return Ok(hit);
            }
        }

        let doc = match &target.policy_url {
            Some(policy_url) => self.acquirer.acquire_policy_at(&target.page_url, policy_url).await,
            None => self.acquirer.acquire_policy(&target.page_url).await,
        };
        let doc = PolicyDocument {
            domain: domain.to_string(),
            ..doc
        };

        if !doc.is_ok() {
            let outcome = CacheOutcome::AcquisitionFailed {
                domain: domain.to_string(),
                status: doc.status,
                diagnostic: doc.diagnostic.clone(),
            };
            // A failed recheck leaves a previously good policy and assessment alone.
            if mode == Mode::Recheck && self.store.get_assessment(domain)?.is_some() {
                return Ok(outcome);
            }
            self.store.put_policy(&doc)?;
            self.remember_failure(domain, &outcome);
            return Ok(outcome);
        }

        if mode == Mode::Recheck {
            let unchanged = self.store.policy_hash(domain)?.as_deref() == Some(content_hash(&doc.text).as_str());
            if unchanged {
                if let Some(existing) = self.store.get_assessment(domain)? {
                    tracing::info!(domain, "policy unchanged, keeping assessment");
                    return Ok(CacheOutcome::Assessed {
                        assessment: Arc::new(existing),
                        policy_word_count: doc.word_count,
                    });
                }
            }
        }

        match self.assessor.assess(&doc).await {
            Ok(assessment) => {
                self.store.put_policy(&doc)?;
                self.store.put_assessment(&assessment)?;
                Ok(CacheOutcome::Assessed {
                    assessment: Arc::new(assessment),
                    policy_word_count: doc.word_count,
                })
            }
            Err(AssessError::Provider(e)) => Err(PipelineError::Provider(e)),
            Err(AssessError::Unavailable { diagnostics }) => {
                self.store.put_policy(&doc)?;
                let outcome = CacheOutcome::AssessmentUnavailable {
                    domain: domain.to_string(),
                    diagnostics,
                };
                self.remember_failure(domain, &outcome);
                Ok(outcome)
            }
            Err(AssessError::NotAssessable(reason)) => Ok(CacheOutcome::AssessmentUnavailable {
                domain: domain.to_string(),
                diagnostics: vec![reason],
            }),
        }
    }

    fn remember_failure(&self, domain: &str, outcome: &CacheOutcome) {
        let expires = self.clock.now() + self.negative_ttl;
        self.negative
            .lock()
            .unwrap()
            .insert(domain.to_string(), (expires, outcome.clone()));
    }
}

struct Target {
    page_url: Url,
    policy_url: Option<Url>,
}
