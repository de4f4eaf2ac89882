//! Compares four online bookstores and prints a ranking, best first.
//!
//! The sites are the bundled fixtures and the model answers are scripted, so
//! the report is the same on every run.

use std::sync::Arc;
use std::time::Duration;

use policyscope::acquisition::{AcquisitionConfig, PolicyAcquirer};
use policyscope::assessment::ranking_report;
use policyscope::fixtures::FixtureServer;
use policyscope::llm::GatewayConfig;
use policyscope::store::CacheOutcome;
use policyscope::{AssessmentCache, Assessor, LlmGateway, MockProvider, Store};

#[tokio::main]
async fn main() {
    let root = FixtureServer::bundled_root();
    let server = FixtureServer::start(&root).await.unwrap();
    let mock = MockProvider::from_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenarios/bookstores")).unwrap();
    let gateway = Arc::new(LlmGateway::new(Arc::new(mock), GatewayConfig::default()));
    let acquirer = PolicyAcquirer::new(
        Arc::new(server.fetcher(Duration::from_secs(2))),
        &AcquisitionConfig::default(),
    );
    let cache = Arc::new(AssessmentCache::new(
        Arc::new(Store::in_memory().unwrap()),
        Arc::new(acquirer),
        Arc::new(Assessor::new(gateway)),
        Arc::new(policyscope::clock::SystemClock),
    ));

    let mut assessments = Vec::new();
    for host in [
        "bookstore-a.test",
        "bookstore-b.test",
        "bookstore-c.test",
        "bookstore-d.test",
    ] {
        match cache.get_or_assess(&server.url(host, "/"), None).await {
            Ok(CacheOutcome::Assessed { assessment, .. }) => assessments.push((*assessment).clone()),
            Ok(other) => eprintln!("{host}: {other:?}"),
            Err(e) => eprintln!("{host}: {e}"),
        }
    }
    print!("{}", ranking_report(&assessments));
}
