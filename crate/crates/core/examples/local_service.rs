//! Runs the HTTP service on a free port and talks to it like the browser
//! extension does: assess the current page, open a criterion chat, ask a
//! question, change the reading level, ask again.

use std::sync::Arc;
use std::time::Duration;

use policyscope::acquisition::{AcquisitionConfig, PolicyAcquirer};
use policyscope::fixtures::FixtureServer;
use policyscope::llm::GatewayConfig;
use policyscope::service::ServiceBuilder;
use policyscope::{LlmGateway, MockProvider, Store};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = FixtureServer::bundled_root();
    let sites = FixtureServer::start(&root).await?;
    let mock = MockProvider::from_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenarios/bookstores"))?;
    let gateway = Arc::new(LlmGateway::new(Arc::new(mock), GatewayConfig::default()));
    let acquirer = PolicyAcquirer::new(
        Arc::new(sites.fetcher(Duration::from_secs(2))),
        &AcquisitionConfig::default(),
    );
    let service = ServiceBuilder::new(Arc::new(Store::in_memory()?), gateway, acquirer)
        .study_mode(true)
        .build();

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(service.serve(listener, async {
        let _ = stopped.await;
    }));
    println!("service on {base}");

    let http = reqwest::Client::new();
    let assessed: Value = http
        .post(format!("{base}/assess"))
        .json(&json!({ "page_url": "http://bookstore-c.test/" }))
        .send()
        .await?
        .json()
        .await?;
    println!(
        "assess: {} {} pressing={}",
        assessed["domain"], assessed["overall_color"], assessed["pressing_issues"]
    );

    let chips: Value = http
        .get(format!("{base}/suggestions?domain=bookstore-c.test&criterion=Consent"))
        .send()
        .await?
        .json()
        .await?;
    println!("suggestions: {}", chips["suggestions"]);

    let ask = |question: &str| json!({ "domain": "bookstore-c.test", "scope": { "criterion": "Consent" }, "question": question });
    let reply: Value = http
        .post(format!("{base}/chat"))
        .json(&ask("Do I have to agree to tracking?"))
        .send()
        .await?
        .json()
        .await?;
    println!("answer: {}", reply["answer"]);

    http.put(format!("{base}/settings"))
        .json(&json!({ "length": "short", "complexity": "expert" }))
        .send()
        .await?
        .error_for_status()?;
    let reply: Value = http
        .post(format!("{base}/chat"))
        .json(&ask("Which legal basis applies?"))
        .send()
        .await?
        .json()
        .await?;
    println!("answer: {}\nnext: {}", reply["answer"], reply["suggestions"]);

    let log = http.get(format!("{base}/events")).send().await?.text().await?;
    println!("activity log:\n{log}");

    let _ = stop.send(());
    server.await??;
    Ok(())
}
