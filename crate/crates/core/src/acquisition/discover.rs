//! Privacy-policy link discovery on a landing page.

use percent_encoding::percent_decode_str;
use scraper::{ElementRef, Html, Selector};
use url::Url;

/// Ordered keyword list; a lower index is a stronger signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    keywords: Vec<String>,
}

impl Default for KeywordTable {
    fn default() -> Self {
        Self::new([
            "privacy policy",
            "privacy",
            "datenschutzerklärung",
            "datenschutz",
            "data protection",
        ])
    }
}

impl KeywordTable {
    pub fn new<I, S>(keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            keywords: keywords
                .into_iter()
                .map(|k| normalize(&k.into()))
                .filter(|k| !k.is_empty())
                .collect(),
        }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    /// Index of the first keyword contained in the already-normalized `haystack`.
    fn rank(&self, haystack: &str) -> Option<usize> {
        self.keywords.iter().position(|k| haystack.contains(k.as_str()))
    }
}

/// Where an anchor matched the keyword table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchSource {
    Text,
    Href,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub url: Url,
    pub keyword_rank: usize,
    pub source: MatchSource,
    pub in_footer: bool,
    pub position: usize,
}

impl Candidate {
    fn sort_key(&self) -> (usize, bool, MatchSource, usize) {
        (self.keyword_rank, !self.in_footer, self.source, self.position)
    }
}

/// Result of a successful discovery: the chosen URL plus the other distinct
/// candidates in rank order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discovery {
    pub url: Url,
    pub alternates: Vec<Url>,
}

/// Every anchor on the page that matches a keyword, best first, one entry per
/// distinct resolved URL.
pub fn rank_candidates(page_html: &str, base_url: &Url, keywords: &KeywordTable) -> Vec<Candidate> {
    let document = Html::parse_document(page_html);
    let anchors = Selector::parse("a[href]").unwrap();

    let mut candidates: Vec<Candidate> = Vec::new();
    for (position, anchor) in document.select(&anchors).enumerate() {
        let Some(href) = anchor.value().attr("href") else {
            continue;
        };
        let Some(url) = resolve(base_url, href) else {
            continue;
        };

        let text = normalize(&anchor.text().collect::<String>());
        let title = anchor
            .value()
            .attr("title")
            .or_else(|| anchor.value().attr("aria-label"))
            .map(normalize)
            .unwrap_or_default();
        let matched = keywords
            .rank(&text)
            .map(|rank| (rank, MatchSource::Text))
            .or_else(|| keywords.rank(&title).map(|rank| (rank, MatchSource::Text)))
            .or_else(|| {
                keywords
                    .rank(&normalize(&href_words(&url)))
                    .map(|rank| (rank, MatchSource::Href))
            });
        let Some((keyword_rank, source)) = matched else {
            continue;
        };

        candidates.push(Candidate {
            url,
            keyword_rank,
            source,
            in_footer: in_footer(anchor),
            position,
        });
    }

    candidates.sort_by_key(Candidate::sort_key);
    let mut seen = Vec::new();
    candidates.retain(|c| {
        let key = without_fragment(&c.url);
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    candidates
}

/// Picks the best privacy-policy link on the page. `None` when no anchor
/// matches the keyword table.
pub fn discover_policy_url(page_html: &str, base_url: &Url, keywords: &KeywordTable) -> Option<Discovery> {
    let mut ranked = rank_candidates(page_html, base_url, keywords).into_iter();
    let best = ranked.next()?;
    Some(Discovery {
        url: best.url,
        alternates: ranked.map(|c| c.url).collect(),
    })
}

fn resolve(base: &Url, href: &str) -> Option<Url> {
    let href = href.trim();
    if href.is_empty() || href.starts_with('#') {
        return None;
    }
    let url = base.join(href).ok()?;
    matches!(url.scheme(), "http" | "https").then_some(url)
}

fn without_fragment(url: &Url) -> String {
    let mut url = url.clone();
    url.set_fragment(None);
    url.to_string()
}

/// Path and query of a URL as plain words, so `/privacy-policy.html` reads as
/// `privacy policy html`.
fn href_words(url: &Url) -> String {
    let mut raw = url.path().to_string();
    if let Some(query) = url.query() {
        raw.push(' ');
        raw.push_str(query);
    }
    percent_decode_str(&raw)
        .decode_utf8_lossy()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect()
}

fn in_footer(anchor: ElementRef<'_>) -> bool {
    anchor.ancestors().filter_map(ElementRef::wrap).any(|el| {
        let v = el.value();
        v.name() == "footer"
            || v.attr("role").is_some_and(|r| r.eq_ignore_ascii_case("contentinfo"))
            || v.id().is_some_and(|id| id.to_ascii_lowercase().contains("footer"))
            || v.classes().any(|c| c.to_ascii_lowercase().contains("footer"))
    })
}

/// Lowercase, whitespace-collapsed form used for keyword matching.
fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}
