//! Locating, fetching, cleaning and validating a site's privacy policy.

mod discover;
mod extract;
mod fetch;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use discover::{discover_policy_url, rank_candidates, Candidate, Discovery, KeywordTable, MatchSource};
pub use extract::{extract_text, word_count};
pub use fetch::{FetchBlocked, HttpFetcher, PageFetcher, RendererCommand, RenderingFetcher};

use crate::clock::{Clock, SystemClock};
use crate::domain::registrable_domain;

pub const DEFAULT_MIN_WORDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionStatus {
    Ok,
    LinkNotFound,
    FetchBlocked,
    TooShort,
}

impl AcquisitionStatus {
    pub fn is_ok(self) -> bool {
        self == Self::Ok
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::LinkNotFound => "link_not_found",
            Self::FetchBlocked => "fetch_blocked",
            Self::TooShort => "too_short",
        }
    }
}

/// Fetched and cleaned policy text for one domain.
///
/// Build through [`PolicyDocument::ok`] or [`PolicyDocument::failed`] so the
/// status, text and word count stay consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub domain: String,
    pub source_url: String,
    pub text: String,
    pub word_count: usize,
    pub fetched_at: DateTime<Utc>,
    pub status: AcquisitionStatus,
    /// Other policy links found on the landing page, best first.
    #[serde(default)]
    pub alternates: Vec<String>,
    /// Why acquisition failed, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl PolicyDocument {
    pub fn ok(
        domain: impl Into<String>,
        source_url: impl Into<String>,
        text: impl Into<String>,
        fetched_at: DateTime<Utc>,
    ) -> Self {
        let text = text.into();
        Self {
            domain: domain.into(),
            source_url: source_url.into(),
            word_count: word_count(&text),
            text,
            fetched_at,
            status: AcquisitionStatus::Ok,
            alternates: Vec::new(),
            diagnostic: None,
        }
    }

    pub fn failed(
        domain: impl Into<String>,
        source_url: impl Into<String>,
        status: AcquisitionStatus,
        diagnostic: impl Into<String>,
        fetched_at: DateTime<Utc>,
    ) -> Self {
        debug_assert!(status != AcquisitionStatus::Ok);
        Self {
            domain: domain.into(),
            source_url: source_url.into(),
            text: String::new(),
            word_count: 0,
            fetched_at,
            status,
            alternates: Vec::new(),
            diagnostic: Some(diagnostic.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub timeout_secs: u64,
    pub min_words: usize,
    /// Replaces the built-in keyword table when set.
    pub keywords: Option<Vec<String>>,
    /// Use a headless renderer instead of plain HTTP.
    pub renderer: Option<RendererCommand>,
    /// Host name to socket address overrides for plain HTTP fetching.
    pub resolve: HashMap<String, SocketAddr>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            timeout_secs: 20,
            min_words: DEFAULT_MIN_WORDS,
            keywords: None,
            renderer: None,
            resolve: HashMap::new(),
        }
    }
}

impl AcquisitionConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn keyword_table(&self) -> KeywordTable {
        match &self.keywords {
            Some(list) => KeywordTable::new(list.iter().cloned()),
            None => KeywordTable::default(),
        }
    }

    /// The fetcher this configuration asks for.
    pub fn fetcher(&self) -> Arc<dyn PageFetcher> {
        match &self.renderer {
            Some(command) => Arc::new(RenderingFetcher::new(command.clone(), self.timeout())),
            None if self.resolve.is_empty() => Arc::new(HttpFetcher::new(self.timeout())),
            None => Arc::new(HttpFetcher::with_overrides(self.timeout(), &self.resolve)),
        }
    }
}

/// Discover -> fetch -> extract -> validate.
pub struct PolicyAcquirer {
    fetcher: Arc<dyn PageFetcher>,
    keywords: KeywordTable,
    min_words: usize,
    clock: Arc<dyn Clock>,
}

impl PolicyAcquirer {
    pub fn new(fetcher: Arc<dyn PageFetcher>, config: &AcquisitionConfig) -> Self {
        Self {
            fetcher,
            keywords: config.keyword_table(),
            min_words: config.min_words,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn from_config(config: &AcquisitionConfig) -> Self {
        Self::new(config.fetcher(), config)
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn min_words(&self) -> usize {
        self.min_words
    }

    /// Finds and fetches the policy linked from `page_url`. Never fails:
    /// problems are reported through the document's status.
    pub async fn acquire_policy(&self, page_url: &Url) -> PolicyDocument {
        let domain = registrable_domain(page_url).unwrap_or_default();
        let landing = match self.fetcher.fetch_page(page_url).await {
            Ok(html) => html,
            Err(e) => return self.failure(&domain, page_url, AcquisitionStatus::FetchBlocked, e.to_string()),
        };
        let Some(found) = discover_policy_url(&landing, page_url, &self.keywords) else {
            return self.failure(
                &domain,
                page_url,
                AcquisitionStatus::LinkNotFound,
                "no anchor matched the privacy keyword table",
            );
        };
        let mut doc = self.fetch_policy(&domain, &found.url).await;
        doc.alternates = found.alternates.iter().map(Url::to_string).collect();
        doc
    }

    /// Skips discovery and fetches a known policy URL, attributing it to the
    /// domain of `page_url`.
    pub async fn acquire_policy_at(&self, page_url: &Url, policy_url: &Url) -> PolicyDocument {
        let domain = registrable_domain(page_url).unwrap_or_default();
        self.fetch_policy(&domain, policy_url).await
    }

    async fn fetch_policy(&self, domain: &str, policy_url: &Url) -> PolicyDocument {
        let html = match self.fetcher.fetch_page(policy_url).await {
            Ok(html) => html,
            Err(e) => return self.failure(domain, policy_url, AcquisitionStatus::FetchBlocked, e.to_string()),
        };
        let text = extract_text(&html);
        let words = word_count(&text);
        if words < self.min_words {
            return self.failure(
                domain,
                policy_url,
                AcquisitionStatus::TooShort,
                format!("{words} words, below the {}-word minimum", self.min_words),
            );
        }
        PolicyDocument::ok(domain, policy_url.as_str(), text, self.clock.now())
    }

    fn failure(
        &self,
        domain: &str,
        url: &Url,
        status: AcquisitionStatus,
        diagnostic: impl Into<String>,
    ) -> PolicyDocument {
        tracing::debug!(domain, url = %url, status = status.as_str(), "policy acquisition failed");
        PolicyDocument::failed(domain, url.as_str(), status, diagnostic, self.clock.now())
    }
}
