#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use policyscope::acquisition::{AcquisitionConfig, PolicyAcquirer, PolicyDocument};
use policyscope::clock::ManualClock;
use policyscope::fixtures::FixtureServer;
use policyscope::llm::{GatewayConfig, LlmGateway, MockProvider};
use policyscope::service::{Service, ServiceBuilder};
use policyscope::store::Store;
use tower::ServiceExt;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn start_time() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 9, 0, 0).unwrap()
}

pub fn manual_clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(start_time()))
}

/// A response in the shape the assessment prompt asks for.
pub fn rating_response(criteria: &[(&str, u8)]) -> String {
    let names: Vec<&str> = criteria.iter().map(|(n, _)| *n).collect();
    let mut out = format!(
        "1. Criteria: {}.\n\n2. Analysis: The policy was checked.\n\n3. Evaluation:\n\n",
        names.join(", ")
    );
    for (name, score) in criteria {
        out.push_str(&format!("{name}: {score}/5\nJustification for {name}.\n\n"));
    }
    out.push_str("4. Conclusion: The evaluation is complete.\n");
    out
}

/// Policy text of at least `words` words that contains `marker`.
pub fn policy_text(marker: &str, words: usize) -> String {
    let mut text = format!("This privacy policy applies to {marker}.");
    let filler = "We process personal data only for the purposes stated here.";
    while text.split_whitespace().count() < words {
        text.push(' ');
        text.push_str(filler);
    }
    text
}

pub fn policy_doc(domain: &str, marker: &str) -> PolicyDocument {
    PolicyDocument::ok(
        domain,
        format!("https://{domain}/privacy"),
        policy_text(marker, 150),
        start_time(),
    )
}

pub fn gateway(mock: &Arc<MockProvider>) -> Arc<LlmGateway> {
    Arc::new(LlmGateway::new(mock.clone(), GatewayConfig::default()))
}

/// A service over an in-memory store, the fixture sites and a mock model.
pub struct Stack {
    pub fixtures: FixtureServer,
    pub mock: Arc<MockProvider>,
    pub clock: Arc<ManualClock>,
    pub service: Service,
    pub router: Router,
}

impl Stack {
    pub async fn new(mock: MockProvider) -> Self {
        Self::with_store(mock, Arc::new(Store::in_memory().unwrap()), false).await
    }

    pub async fn with_store(mock: MockProvider, store: Arc<Store>, study_mode: bool) -> Self {
        let fixtures = FixtureServer::start(FixtureServer::bundled_root()).await.unwrap();
        let mock = Arc::new(mock);
        let clock = manual_clock();
        let config = AcquisitionConfig {
            timeout_secs: 2,
            ..AcquisitionConfig::default()
        };
        let acquirer = PolicyAcquirer::new(Arc::new(fixtures.fetcher(Duration::from_secs(2))), &config);
        let service = ServiceBuilder::new(store, gateway(&mock), acquirer)
            .clock(clock.clone())
            .study_mode(study_mode)
            .build();
        let router = service.router();
        Self {
            fixtures,
            mock,
            clock,
            service,
            router,
        }
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<serde_json::Value>) -> Reply {
        call(&self.router, method, uri, body).await
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn parse<T: serde::de::DeserializeOwned>(&self) -> T {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("unexpected body ({e}): {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn call(router: &Router, method: Method, uri: &str, body: Option<serde_json::Value>) -> Reply {
    let mut request = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(json) => {
            request = request.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&json).unwrap())
        }
        None => Body::empty(),
    };
    let response = router.clone().oneshot(request.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let headers = response.headers().clone();
    let body = axum::body::to_bytes(response.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    Reply { status, headers, body }
}

/// Questions shared by the random provider and random users, so generated
/// suggestions regularly collide with questions already asked.
pub const QUESTION_POOL: &[&str] = &[
    "Who gets my data?",
    "How long is my data kept?",
    "Can I delete my account?",
    "Is my data sold?",
    "Where is my data stored?",
    "Do you use cookies for ads?",
    "How is my data protected?",
    "Can I object to profiling?",
];

/// A provider that answers from a seeded RNG: chat answers, numbered lists
/// of 0-4 questions drawn from [`QUESTION_POOL`] (with repeats), and
/// occasional transient failures.
pub struct ChaosProvider {
    rng: std::sync::Mutex<rand_chacha::ChaCha8Rng>,
    failure_percent: u32,
    pub calls: std::sync::Mutex<Vec<policyscope::llm::PromptRequest>>,
}

impl ChaosProvider {
    pub fn new(seed: u64, failure_percent: u32) -> Self {
        use rand::SeedableRng;
        Self {
            rng: std::sync::Mutex::new(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
            failure_percent,
            calls: std::sync::Mutex::default(),
        }
    }
}

#[async_trait::async_trait]
impl policyscope::llm::CompletionProvider for ChaosProvider {
    fn id(&self) -> &str {
        "chaos"
    }

    async fn complete(
        &self,
        model: &str,
        request: &policyscope::llm::PromptRequest,
    ) -> Result<policyscope::llm::ModelResponse, policyscope::llm::LlmError> {
        use rand::Rng;
        self.calls.lock().unwrap().push(request.clone());
        let mut rng = self.rng.lock().unwrap();
        if rng.gen_range(0..100) < self.failure_percent {
            return Err(policyscope::llm::LlmError::ProviderUnavailable("chaos".into()));
        }
        let text = match request.tier {
            policyscope::llm::Tier::Assessment => format!("Answer {}", rng.gen::<u16>()),
            policyscope::llm::Tier::Lightweight => {
                let n = rng.gen_range(0..=4);
                (1..=n)
                    .map(|i| format!("{i}. {}", QUESTION_POOL[rng.gen_range(0..QUESTION_POOL.len())]))
                    .collect::<Vec<_>>()
                    .join("\n")
                    + if n == 0 { "I have no questions." } else { "" }
            }
        };
        Ok(policyscope::llm::ModelResponse {
            text,
            token_usage: Default::default(),
            provider_id: "chaos".into(),
            model_id: model.into(),
        })
    }
}

/// Stores an assessment and policy for `domain` with the given criteria.
pub fn seed_domain(store: &Store, domain: &str, criteria: &[(&str, u8)]) {
    use policyscope::assessment::{CriterionRating, LikertScore, PolicyAssessment};
    store.put_policy(&policy_doc(domain, domain)).unwrap();
    let ratings = criteria
        .iter()
        .map(|(n, s)| CriterionRating::new(*n, LikertScore::new((*s).into()).unwrap(), format!("About {n}.")))
        .collect();
    store
        .put_assessment(&PolicyAssessment::from_ratings(domain, ratings, "", "mock", start_time()).unwrap())
        .unwrap();
}
