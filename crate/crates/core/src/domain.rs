//! Registrable-domain keys.
//!
//! Every page of a site shares one assessment, so caches and chat threads
//! are keyed by the registrable domain (`shop.example.co.uk` -> `example.co.uk`)
//! rather than by URL.

use url::{Host, Url};

/// Returns the registrable domain of `url`, lowercased.
///
/// IP hosts and single-label hosts such as `localhost` are returned verbatim.
/// `None` when the URL has no host.
pub fn registrable_domain(url: &Url) -> Option<String> {
    match url.host()? {
        Host::Ipv4(ip) => Some(ip.to_string()),
        Host::Ipv6(ip) => Some(ip.to_string()),
        Host::Domain(host) => {
            let host = host.trim_end_matches('.').to_ascii_lowercase();
            if !host.contains('.') {
                return Some(host);
            }
            match psl::domain_str(&host) {
                Some(domain) => Some(domain.to_string()),
                None => Some(host),
            }
        }
    }
}

/// Parses `raw` as an absolute http(s) URL.
pub fn parse_web_url(raw: &str) -> Option<Url> {
    let url = Url::parse(raw.trim()).ok()?;
    match url.scheme() {
        "http" | "https" if url.host().is_some() => Some(url),
        _ => None,
    }
}
