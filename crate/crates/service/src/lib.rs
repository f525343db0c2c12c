//! HTTP facade over one immutable random wheel model.
//!
//! The model is loaded once at startup and shared read-only. Each request's
//! trial streams are derived from the model seed and the canonicalized
//! observation, so the same question always gets the same answer.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use random_wheel::api::{model_version, FactorListing, ModelInfo, RecommendationResponse};
use random_wheel::wheel::recommend;
use random_wheel::{model_io, AttributeKind, Error as WheelError, RandomWheelModel, Value};
use serde::Serialize;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::timeout::TimeoutLayer;
use tower_http::trace::TraceLayer;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub model_path: PathBuf,
    pub max_body_bytes: usize,
    pub request_timeout: Duration,
    /// Allowed browser origins; empty disables CORS headers.
    pub cors_origins: Vec<String>,
}

pub struct LoadedModel {
    pub model: RandomWheelModel,
    pub version: String,
    info_body: String,
}

impl LoadedModel {
    pub fn new(model: RandomWheelModel) -> anyhow::Result<Self> {
        let version = model_version(&model)?;
        let info_body = serde_json::to_string(&ModelInfo::new(&model, &version))?;
        Ok(Self { model, version, info_body })
    }
}

/// Shared handler state. Empty until the model finishes loading.
#[derive(Clone, Default)]
pub struct AppState {
    loaded: Arc<OnceLock<LoadedModel>>,
}

impl AppState {
    pub fn with_model(model: LoadedModel) -> Self {
        let state = Self::default();
        state.install(model);
        state
    }

    /// Makes the model available; later calls are ignored.
    pub fn install(&self, model: LoadedModel) {
        let _ = self.loaded.set(model);
    }

    fn get(&self) -> Result<&LoadedModel, ApiError> {
        self.loaded.get().ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "model is loading"))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: message.into(), field: None } }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody { error: message.into(), field: Some(field.to_string()) },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

fn json_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/model", get(model_info))
        .route("/v1/factors", get(factors))
        .route("/v1/recommendations", post(recommendations))
        .with_state(state)
        .layer(DefaultBodyLimit::max(config.max_body_bytes))
        .layer(TimeoutLayer::with_status_code(StatusCode::REQUEST_TIMEOUT, config.request_timeout))
        .layer(TraceLayer::new_for_http());
    if !config.cors_origins.is_empty() {
        let origins: Vec<HeaderValue> = config.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.loaded.get() {
        Some(_) => (StatusCode::OK, "ok").into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, "loading").into_response(),
    }
}

async fn model_info(State(state): State<AppState>) -> Result<Response, ApiError> {
    Ok(json_response(state.get()?.info_body.clone()))
}

async fn factors(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let loaded = state.get()?;
    let top = match params.get("top") {
        None => None,
        Some(raw) => match raw.parse::<i64>() {
            Ok(n) if n >= 1 => Some(usize::try_from(n).unwrap_or(usize::MAX)),
            _ => return Err(ApiError::field("top", format!("top must be a positive integer, got `{raw}`"))),
        },
    };
    let listing = FactorListing::new(&loaded.model, top);
    Ok(json_response(serde_json::to_string(&listing).map_err(internal)?))
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// Converts a name-to-value map into a positional observation.
pub fn observation_from_json(
    model: &RandomWheelModel,
    body: &serde_json::Map<String, serde_json::Value>,
) -> Result<Vec<Value>, ApiError> {
    let schema = model.dataset().schema();
    for name in body.keys() {
        if model.dataset().attribute(name).is_none() {
            return Err(ApiError::field(name, format!("unknown attribute `{name}`")));
        }
    }
    schema
        .iter()
        .map(|a| {
            let mismatch = || ApiError::field(&a.name, format!("`{}` expects a {} value", a.name, a.kind));
            match body.get(&a.name) {
                None | Some(serde_json::Value::Null) => Ok(Value::Missing),
                Some(serde_json::Value::String(s)) => Value::parse(s, a.kind).map_err(|_| mismatch()),
                Some(serde_json::Value::Number(n)) if a.kind != AttributeKind::Categorical => {
                    Value::parse(&n.to_string(), a.kind).map_err(|_| mismatch())
                }
                Some(_) => Err(mismatch()),
            }
        })
        .collect()
}

async fn recommendations(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    state.get()?;
    let map: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("body must be a JSON object: {e}")))?;
    let response = tokio::task::spawn_blocking(move || {
        let loaded = state.get()?;
        let observation = observation_from_json(&loaded.model, &map)?;
        let rec = recommend(&loaded.model, &observation).map_err(|e| match e {
            WheelError::Unclassifiable => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            WheelError::Observation(_) => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
            other => internal(other),
        })?;
        let (response, _) =
            RecommendationResponse::new(&rec, loaded.model.dataset().schema(), &loaded.version).map_err(internal)?;
        serde_json::to_string(&response).map_err(internal)
    })
    .await
    .map_err(internal)??;
    Ok(json_response(response))
}

/// Binds, starts serving (health reports 503), then loads the model. A load
/// failure stops the server and is returned.
pub async fn run(config: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::default();
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let app = router(state.clone(), &config);
    let server = tokio::spawn(async move {
        axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await
    });

    let path = config.model_path.clone();
    let loaded = tokio::task::spawn_blocking(move || -> anyhow::Result<LoadedModel> {
        LoadedModel::new(model_io::load(&path)?)
    })
    .await?;
    match loaded {
        Ok(model) => {
            tracing::info!(version = %model.version, factors = model.model.factor_table().len(), "model loaded");
            state.install(model);
        }
        Err(e) => {
            server.abort();
            return Err(e.context(format!("loading model {}", config.model_path.display())));
        }
    }
    server.await??;
    Ok(())
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}
