//! Finds and extracts privacy policies.
//!
//! Without arguments this runs against the bundled fixture sites, which
//! cover a clean policy, a page without a policy link, a blocked fetch and
//! a stub that is too short to assess. Pass URLs to try real sites:
//!
//! ```text
//! cargo run --example discover_policy -- https://www.example.com/
//! ```

use std::sync::Arc;
use std::time::Duration;

use policyscope::acquisition::{AcquisitionConfig, PolicyAcquirer};
use policyscope::fixtures::FixtureServer;
use policyscope::PolicyDocument;
use url::Url;

fn show(doc: &PolicyDocument) {
    println!("{}  [{}]", doc.domain, doc.status.as_str());
    if doc.is_ok() {
        let preview: String = doc.text.split_whitespace().take(16).collect::<Vec<_>>().join(" ");
        println!("  from {} ({} words)", doc.source_url, doc.word_count);
        println!("  {preview}...");
        for alt in &doc.alternates {
            println!("  also linked: {alt}");
        }
    } else if let Some(why) = &doc.diagnostic {
        println!("  {why}");
    }
}

#[tokio::main]
async fn main() {
    let urls: Vec<String> = std::env::args().skip(1).collect();
    if !urls.is_empty() {
        let acquirer = PolicyAcquirer::from_config(&AcquisitionConfig::default());
        for raw in urls {
            match Url::parse(&raw) {
                Ok(url) => show(&acquirer.acquire_policy(&url).await),
                Err(e) => println!("{raw}: {e}"),
            }
        }
        return;
    }

    let server = FixtureServer::start(FixtureServer::bundled_root())
        .await
        .expect("fixture server");
    let acquirer = PolicyAcquirer::new(
        Arc::new(server.fetcher(Duration::from_secs(2))),
        &AcquisitionConfig::default(),
    );
    for host in [
        "bookstore-a.test",
        "multiple-links.test",
        "german-shop.test",
        "no-link.test",
        "blocked-403.test",
        "stub-policy.test",
    ] {
        show(&acquirer.acquire_policy(&server.url(host, "/")).await);
    }
}
