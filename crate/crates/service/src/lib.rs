//! HTTP JSON API over a loaded index bundle.

use std::future::Future;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tablefill_core::columns::suggest_columns;
use tablefill_core::rows::suggest_rows;
use tablefill_core::search::{search_entities, search_labels, EntityHit, LabelHit};
use tablefill_core::{IndexBundle, QueryError, ScoringParams, SeedTable, Suggestion};
use tokio::net::TcpListener;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{Any, CorsLayer};

pub const DEFAULT_LIMIT: usize = 10;
pub const MAX_LIMIT: usize = 100;

pub struct AppState {
    pub bundle: IndexBundle,
    pub params: ScoringParams,
}

impl AppState {
    pub fn new(bundle: IndexBundle, params: ScoringParams) -> Arc<Self> {
        Arc::new(Self { bundle, params })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestRequest {
    pub seed: SeedTable,
    pub limit: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuggestResponse {
    pub suggestions: Vec<Suggestion>,
    pub took_micros: u64,
}

#[derive(Debug, Deserialize)]
pub struct SearchQuery {
    pub q: Option<String>,
    pub limit: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub tables: usize,
    pub entities: usize,
}

/// Error body `{code, message, details}` with its status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "code": self.code,
            "message": self.message,
            "details": self.details,
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let status = StatusCode::UNPROCESSABLE_ENTITY;
        match e {
            QueryError::EmptySeedEntities => {
                ApiError::new(status, "EMPTY_SEED_ENTITIES", e.to_string())
            }
            QueryError::EmptySeed => ApiError::new(status, "EMPTY_SEED", e.to_string()),
            QueryError::UnknownEntities(ref ids) => {
                let details = json!(ids);
                ApiError::new(status, "UNKNOWN_ENTITY", e.to_string()).with_details(details)
            }
        }
    }
}

fn check_limit(limit: Option<i64>) -> Result<usize, ApiError> {
    match limit {
        None => Ok(DEFAULT_LIMIT),
        Some(n) if (1..=MAX_LIMIT as i64).contains(&n) => Ok(n as usize),
        Some(n) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "INVALID_LIMIT",
            format!("limit must be between 1 and {MAX_LIMIT}"),
        )
        .with_details(json!(n))),
    }
}

fn parse_request(body: &[u8]) -> Result<(SeedTable, usize), ApiError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "MALFORMED_JSON",
            format!("request body is not valid JSON: {e}"),
        )
    })?;
    let req = SuggestRequest::deserialize(value).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "INVALID_REQUEST",
            format!("invalid suggest request: {e}"),
        )
    })?;
    let limit = check_limit(req.limit)?;
    Ok((req.seed, limit))
}

type Engine = fn(&SeedTable, &IndexBundle, &ScoringParams, usize) -> Result<Vec<Suggestion>, QueryError>;

async fn run_engine(
    state: Arc<AppState>,
    body: Bytes,
    engine: Engine,
) -> Result<Json<SuggestResponse>, ApiError> {
    let (seed, limit) = parse_request(&body)?;
    let (result, took) = tokio::task::spawn_blocking(move || {
        let start = Instant::now();
        let out = engine(&seed, &state.bundle, &state.params, limit);
        (out, start.elapsed())
    })
    .await
    .map_err(|_| internal())?;
    Ok(Json(SuggestResponse {
        suggestions: result?,
        took_micros: took.as_micros() as u64,
    }))
}

async fn rows(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<SuggestResponse>, ApiError> {
    run_engine(state, body, suggest_rows).await
}

async fn columns(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<SuggestResponse>, ApiError> {
    run_engine(state, body, suggest_columns).await
}

fn search_args(
    query: Result<Query<SearchQuery>, QueryRejection>,
) -> Result<(String, usize), ApiError> {
    let Query(query) = query.map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "INVALID_QUERY", e.body_text())
    })?;
    let q = query.q.unwrap_or_default();
    if q.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "EMPTY_QUERY",
            "query parameter q must be non-empty",
        ));
    }
    Ok((q, check_limit(query.limit)?))
}

async fn entity_search(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SearchQuery>, QueryRejection>,
) -> Result<Json<Vec<EntityHit>>, ApiError> {
    let (q, limit) = search_args(query)?;
    Ok(Json(search_entities(&state.bundle, &q, limit)))
}

async fn label_search(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SearchQuery>, QueryRejection>,
) -> Result<Json<Vec<LabelHit>>, ApiError> {
    let (q, limit) = search_args(query)?;
    Ok(Json(search_labels(&state.bundle, &q, limit)))
}

async fn entity(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    match state.bundle.entities.get(&id) {
        Some(record) => Ok(Json(record).into_response()),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "ENTITY_NOT_FOUND",
            format!("no entity with id `{id}`"),
        )
        .with_details(json!(id))),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        tables: state.bundle.tables.len(),
        entities: state.bundle.entities.len(),
    })
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "METHOD_NOT_ALLOWED",
        "method not allowed for this endpoint",
    )
}

fn internal() -> ApiError {
    ApiError::new(
        StatusCode::INTERNAL_SERVER_ERROR,
        "INTERNAL",
        "internal server error",
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/v1/suggest/rows", post(rows))
        .route("/v1/suggest/columns", post(columns))
        .route("/v1/entities/search", get(entity_search))
        .route("/v1/entities/{id}", get(entity))
        .route("/v1/labels/search", get(label_search))
        .route("/v1/health", get(health))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(CatchPanicLayer::custom(|_| internal().into_response()))
        .layer(cors)
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve<F>(listener: TcpListener, state: Arc<AppState>, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
