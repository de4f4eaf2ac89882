//! Local HTTP + JSON service tying acquisition, assessment, chat and
//! storage together.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/assess` | [`AssessRequest`] |
//! | POST | `/reassess/{domain}` | |
//! | POST | `/chat` | [`ChatRequest`] |
//! | GET | `/suggestions` | `?domain=&criterion=` |
//! | GET | `/policy-text` | `?domain=` |
//! | GET, PUT | `/settings` | [`UserSettings`] |
//! | GET, DELETE | `/history/{domain}` | |
//! | GET, POST | `/events` | study mode only |
//! | GET | `/health` | |
//!
//! Every response carries `x-api-version: v1`.

mod config;
mod wire;

use std::future::Future;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Duration;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{ConfigError, ProviderConfig, ServiceConfig, ENV_PREFIX};
pub use wire::*;

use crate::acquisition::PolicyAcquirer;
use crate::assessment::Assessor;
use crate::clock::{Clock, SystemClock};
use crate::conversation::{ChatError, Conversation, SUGGESTION_COUNT};
use crate::domain::{parse_web_url, registrable_domain};
use crate::llm::{
    CompletionProvider, LlmError, LlmGateway, MockProvider, OpenAiProvider, ScenarioError, TemplateSet, UserSettings,
};
use crate::store::{ActivityEvent, AssessmentCache, EventKind, PipelineError, Store, StoreError};

const EXTENSION_SCHEMES: [&str; 3] = ["chrome-extension://", "moz-extension://", "safari-web-extension://"];

static DEMO_SCENARIO: &str = include_str!("../../resources/demo_scenario.toml");

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("reading templates {path}: {message}")]
    Templates { path: String, message: String },
}

/// Assembles a [`Service`] from its parts.
pub struct ServiceBuilder {
    store: Arc<Store>,
    gateway: Arc<LlmGateway>,
    acquirer: PolicyAcquirer,
    clock: Arc<dyn Clock>,
    study_mode: bool,
    allowed_origins: Vec<String>,
    negative_ttl: Duration,
}

impl ServiceBuilder {
    pub fn new(store: Arc<Store>, gateway: Arc<LlmGateway>, acquirer: PolicyAcquirer) -> Self {
        Self {
            store,
            gateway,
            acquirer,
            clock: Arc::new(SystemClock),
            study_mode: false,
            allowed_origins: Vec::new(),
            negative_ttl: Duration::minutes(AssessmentCache::DEFAULT_NEGATIVE_TTL_MINUTES),
        }
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn study_mode(mut self, on: bool) -> Self {
        self.study_mode = on;
        self
    }

    pub fn allowed_origins(mut self, origins: Vec<String>) -> Self {
        self.allowed_origins = origins;
        self
    }

    pub fn negative_ttl(mut self, ttl: Duration) -> Self {
        self.negative_ttl = ttl;
        self
    }

    pub fn build(self) -> Service {
        let acquirer = Arc::new(self.acquirer.with_clock(Arc::clone(&self.clock)));
        let assessor = Arc::new(Assessor::new(Arc::clone(&self.gateway)).with_clock(Arc::clone(&self.clock)));
        let cache = Arc::new(
            AssessmentCache::new(Arc::clone(&self.store), acquirer, assessor, Arc::clone(&self.clock))
                .with_negative_ttl(self.negative_ttl),
        );
        let chat = Conversation::new(Arc::clone(&self.store), self.gateway).with_clock(Arc::clone(&self.clock));
        Service {
            state: AppState(Arc::new(Inner {
                store: self.store,
                cache,
                chat,
                clock: self.clock,
                study_mode: self.study_mode,
            })),
            allowed_origins: self.allowed_origins,
        }
    }
}

pub struct Service {
    state: AppState,
    allowed_origins: Vec<String>,
}

#[derive(Clone)]
struct AppState(Arc<Inner>);

struct Inner {
    store: Arc<Store>,
    cache: Arc<AssessmentCache>,
    chat: Conversation,
    clock: Arc<dyn Clock>,
    study_mode: bool,
}

impl Service {
    /// Builds everything a validated configuration describes.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, BuildError> {
        let provider: Arc<dyn CompletionProvider> = if config.provider.mock {
            let mock = match &config.provider.scenario_dir {
                Some(dir) => MockProvider::from_dir(dir)?,
                None => {
                    let mock = MockProvider::new();
                    mock.load_scenario(DEMO_SCENARIO)?;
                    mock
                }
            };
            Arc::new(mock)
        } else {
            Arc::new(OpenAiProvider::from_env(
                &config.provider.base_url,
                &config.provider.api_key_env,
                std::time::Duration::from_secs(config.models.timeout_secs),
            ))
        };
        let templates = match &config.templates {
            Some(path) => {
                let err = |message: String| BuildError::Templates {
                    path: path.display().to_string(),
                    message,
                };
                let source = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
                TemplateSet::from_toml(&source).map_err(|e| err(e.to_string()))?
            }
            None => TemplateSet::english(),
        };
        let gateway = Arc::new(LlmGateway::with_templates(provider, config.models.clone(), templates));
        let store = Arc::new(Store::open(&config.store_path)?);
        Ok(
            ServiceBuilder::new(store, gateway, PolicyAcquirer::from_config(&config.acquisition))
                .study_mode(config.study_mode)
                .allowed_origins(config.allowed_origins.clone())
                .build(),
        )
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.state.0.store
    }

    pub fn cache(&self) -> &Arc<AssessmentCache> {
        &self.state.0.cache
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/health", get(health))
            .route("/assess", post(assess))
            .route("/reassess/:domain", post(reassess))
            .route("/chat", post(chat))
            .route("/suggestions", get(suggestions))
            .route("/policy-text", get(policy_text))
            .route("/settings", get(get_settings).put(put_settings))
            .route("/history/:domain", get(get_history).delete(delete_history))
            .route("/events", get(export_events).post(post_event))
            .layer(axum::middleware::map_response(version_header))
            .layer(cors_layer(&self.allowed_origins))
            .with_state(self.state.clone())
    }

    /// Serves until `shutdown` resolves. Pending requests finish first, so
    /// every accepted event is written before this returns.
    pub async fn serve(
        self,
        listener: TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> std::io::Result<()> {
        axum::serve(listener, self.router())
            .with_graceful_shutdown(shutdown)
            .await
    }
}

fn cors_layer(allowed: &[String]) -> CorsLayer {
    let origins = if allowed.is_empty() {
        AllowOrigin::predicate(|origin: &HeaderValue, _| {
            origin
                .to_str()
                .is_ok_and(|o| EXTENSION_SCHEMES.iter().any(|s| o.starts_with(s)))
        })
    } else {
        AllowOrigin::list(allowed.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE])
}

async fn version_header(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert("x-api-version", HeaderValue::from_static(API_VERSION));
    response
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::InvalidUrl(_) => StatusCode::UNPROCESSABLE_ENTITY,
            PipelineError::UnknownDomain(_) => StatusCode::NOT_FOUND,
            PipelineError::Provider(_) => StatusCode::BAD_GATEWAY,
            PipelineError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(status, e.to_string())
    }
}

impl From<ChatError> for ApiError {
    fn from(e: ChatError) -> Self {
        let status = match &e {
            ChatError::NotAssessed(_) => StatusCode::CONFLICT,
            ChatError::UnknownCriterion { .. } | ChatError::EmptyQuestion => StatusCode::UNPROCESSABLE_ENTITY,
            ChatError::Provider(LlmError::InvalidRequest(_) | LlmError::TooLong { .. }) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ChatError::Provider(_) => StatusCode::BAD_GATEWAY,
            ChatError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

impl Inner {
    /// Records an activity event in study mode. Logging problems are not
    /// the client's concern and only show up in the service log.
    fn record(&self, kind: EventKind, fill: impl FnOnce(ActivityEvent) -> ActivityEvent) {
        if !self.study_mode {
            return;
        }
        let event = fill(ActivityEvent::new(self.clock.now(), kind));
        if let Err(e) = self.store.log_event(&event) {
            tracing::warn!(error = %e, "could not record activity event");
        }
    }

    fn require_study_mode(&self) -> ApiResult<()> {
        if self.study_mode {
            Ok(())
        } else {
            Err(ApiError(
                StatusCode::FORBIDDEN,
                "activity logging is off outside study mode".into(),
            ))
        }
    }
}

/// Accepts a bare domain or a full URL and returns the registrable domain.
fn domain_param(raw: &str) -> ApiResult<String> {
    let raw = raw.trim();
    let invalid = || ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("not a domain: {raw:?}"));
    if raw.contains("://") {
        return parse_web_url(raw)
            .as_ref()
            .and_then(registrable_domain)
            .ok_or_else(invalid);
    }
    let domain = raw.trim_end_matches('.').to_lowercase();
    if domain.is_empty() || domain.contains(['/', ' ', '?', '#', '@']) {
        return Err(invalid());
    }
    Ok(domain)
}

async fn health(State(s): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "api_version": API_VERSION, "study_mode": s.0.study_mode }))
}

async fn assess(State(s): State<AppState>, Json(req): Json<AssessRequest>) -> ApiResult<Json<AssessResponse>> {
    let bad = |what: &str, v: &str| {
        ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("{what} is not an absolute http(s) URL: {v:?}"),
        )
    };
    let page = parse_web_url(&req.page_url).ok_or_else(|| bad("page_url", &req.page_url))?;
    let policy = match &req.policy_url {
        Some(p) => Some(parse_web_url(p).ok_or_else(|| bad("policy_url", p))?),
        None => None,
    };
    let outcome = s.0.cache.get_or_assess(&page, policy.as_ref()).await?;
    let response = AssessResponse::from(&outcome);
    s.0.record(EventKind::AssessmentRequested, |e| {
        e.with("domain", response.domain.clone())
            .with("status", response.status.clone())
    });
    Ok(Json(response))
}

async fn reassess(State(s): State<AppState>, Path(domain): Path<String>) -> ApiResult<Json<AssessResponse>> {
    let domain = domain_param(&domain)?;
    let outcome = s.0.cache.reassess(&domain).await?;
    Ok(Json(AssessResponse::from(&outcome)))
}

async fn chat(State(s): State<AppState>, Json(req): Json<ChatRequest>) -> ApiResult<Json<ChatResponse>> {
    let domain = domain_param(&req.domain)?;
    let settings = match req.settings {
        Some(settings) => settings,
        None => s.0.store.get_settings()?,
    };
    let answer = s.0.chat.ask(&domain, &req.scope, &req.question, settings).await?;
    s.0.record(EventKind::QuestionAsked, |e| {
        e.with("domain", domain.clone())
            .with("scope", req.scope.key())
            .with("question_length", req.question.trim().chars().count())
    });
    let suggestions = s.0.chat.suggest(&domain, &req.scope).await?;
    Ok(Json(ChatResponse { answer, suggestions }))
}

async fn suggestions(
    State(s): State<AppState>,
    Query(q): Query<SuggestionsQuery>,
) -> ApiResult<Json<SuggestionsResponse>> {
    let domain = domain_param(&q.domain)?;
    let scope = q.scope();
    let stored =
        s.0.store
            .get_thread(&domain, &scope)?
            .map(|t| t.suggestions)
            .unwrap_or_default();
    let suggestions = if stored.len() == SUGGESTION_COUNT {
        stored
    } else {
        s.0.chat.suggest(&domain, &scope).await?
    };
    Ok(Json(SuggestionsResponse { suggestions }))
}

async fn policy_text(State(s): State<AppState>, Query(q): Query<DomainQuery>) -> ApiResult<Json<PolicyTextResponse>> {
    let domain = domain_param(&q.domain)?;
    let doc =
        s.0.store
            .get_policy(&domain)?
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no policy stored for {domain}")))?;
    s.0.record(EventKind::PolicyViewed, |e| e.with("domain", domain.clone()));
    Ok(Json(PolicyTextResponse::from(&doc)))
}

async fn get_settings(State(s): State<AppState>) -> ApiResult<Json<UserSettings>> {
    Ok(Json(s.0.store.get_settings()?))
}

async fn put_settings(State(s): State<AppState>, Json(settings): Json<UserSettings>) -> ApiResult<Json<UserSettings>> {
    s.0.store.put_settings(&settings)?;
    s.0.record(EventKind::SettingsChanged, |e| {
        e.with("length", serde_json::to_value(settings.length).unwrap_or_default())
            .with(
                "complexity",
                serde_json::to_value(settings.complexity).unwrap_or_default(),
            )
    });
    Ok(Json(settings))
}

async fn get_history(State(s): State<AppState>, Path(domain): Path<String>) -> ApiResult<Json<HistoryResponse>> {
    let domain = domain_param(&domain)?;
    let threads = s.0.store.get_threads(&domain)?;
    Ok(Json(HistoryResponse { domain, threads }))
}

async fn delete_history(State(s): State<AppState>, Path(domain): Path<String>) -> ApiResult<StatusCode> {
    let domain = domain_param(&domain)?;
    s.0.chat.clear_history(&domain)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn post_event(State(s): State<AppState>, Json(req): Json<EventRequest>) -> ApiResult<StatusCode> {
    s.0.require_study_mode()?;
    let event = ActivityEvent {
        at: req.at.unwrap_or_else(|| s.0.clock.now()),
        kind: req.kind,
        payload: req.payload,
    };
    s.0.store.log_event(&event)?;
    Ok(StatusCode::ACCEPTED)
}

async fn export_events(State(s): State<AppState>) -> ApiResult<Response> {
    s.0.require_study_mode()?;
    let mut body = Vec::new();
    s.0.store.export_events_ndjson(&mut body)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
