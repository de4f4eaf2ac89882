//! The per-domain cache: repeat visits and concurrent tabs share one model
//! call, and failed lookups are remembered for ten minutes.

use std::sync::Arc;
use std::time::Duration;

use chrono::{TimeDelta, Utc};
use policyscope::acquisition::{AcquisitionConfig, PolicyAcquirer};
use policyscope::clock::ManualClock;
use policyscope::fixtures::FixtureServer;
use policyscope::llm::{GatewayConfig, Tier};
use policyscope::{AssessmentCache, Assessor, LlmGateway, MockProvider, Store};

#[tokio::main]
async fn main() {
    let server = FixtureServer::start(FixtureServer::bundled_root()).await.unwrap();
    let mock = Arc::new(
        MockProvider::from_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenarios/bookstores")).unwrap(),
    );
    let clock = Arc::new(ManualClock::new(Utc::now()));
    let gateway = Arc::new(LlmGateway::new(mock.clone(), GatewayConfig::default()));
    let acquirer = PolicyAcquirer::new(
        Arc::new(server.fetcher(Duration::from_secs(2))),
        &AcquisitionConfig::default(),
    )
    .with_clock(clock.clone());
    let cache = Arc::new(AssessmentCache::new(
        Arc::new(Store::in_memory().unwrap()),
        Arc::new(acquirer),
        Arc::new(Assessor::new(gateway).with_clock(clock.clone())),
        clock.clone(),
    ));

    // Three tabs on the same site at once, then a later visit to another page.
    let page = server.url("bookstore-a.test", "/");
    let (a, b, c) = tokio::join!(
        cache.get_or_assess(&page, None),
        cache.get_or_assess(&page, None),
        cache.get_or_assess(&page, None),
    );
    let color = a.unwrap().assessment().map(|x| x.overall);
    assert!(b.is_ok() && c.is_ok());
    cache
        .get_or_assess(&server.url("bookstore-a.test", "/books"), None)
        .await
        .unwrap();
    println!(
        "bookstore-a.test: {color:?} after 4 lookups, {} model call(s)",
        mock.call_count(Tier::Assessment)
    );

    let missing = server.url("no-link.test", "/");
    let first = cache.get_or_assess(&missing, None).await.unwrap();
    println!("no-link.test: {first:?}");
    clock.advance(TimeDelta::minutes(9));
    let cached = cache.get_or_assess(&missing, None).await.unwrap() == first;
    println!("  9 minutes later, answered from the failure cache: {cached}");
    clock.advance(TimeDelta::minutes(2));
    cache.get_or_assess(&missing, None).await.unwrap();
    println!("  11 minutes later the site is checked again");

    // Reassessment refetches but only calls the model when the text changed.
    cache.reassess("bookstore-a.test").await.unwrap();
    println!(
        "after reassess of an unchanged policy: {} model call(s)",
        mock.call_count(Tier::Assessment)
    );
}
