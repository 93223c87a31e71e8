//! HTTP+JSON API over a store.
//!
//! Reads share the engine behind a read lock; topic mutations take the write
//! lock and save the store before the response is sent.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, PoisonError, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use vulntrack_core::store::ServeLock;
use vulntrack_core::{Engine, Error, Granularity, ResultOrder, SpikeConfig};

use crate::views;

pub type SharedEngine = Arc<RwLock<Engine>>;

/// A JSON error body with its status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::TopicExists(_) | Error::StoreLocked(_) => StatusCode::CONFLICT,
        Error::InvalidRange { .. } | Error::InvalidConfig(_) | Error::InvalidInput(_) => {
            StatusCode::BAD_REQUEST
        }
        Error::EmptyTopic
        | Error::NoEmbedding(_)
        | Error::UndefinedScore(_)
        | Error::InsufficientData { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        Self {
            status: status_for(&err),
            message: err.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rej: JsonRejection) -> Self {
        Self {
            status: rej.status(),
            message: rej.body_text(),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rej: QueryRejection) -> Self {
        Self::bad_request(rej.body_text())
    }
}

impl<T> From<PoisonError<T>> for ApiError {
    fn from(_: PoisonError<T>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: "engine state is poisoned".into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, "{}", self.message);
        }
        let body = json!({ "error": self.message }).to_string();
        (
            self.status,
            [(header::CONTENT_TYPE, "application/json")],
            body,
        )
            .into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_body(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok(body: String) -> ApiResult {
    Ok(json_body(StatusCode::OK, body))
}

pub fn router(engine: SharedEngine) -> Router {
    Router::new()
        .route("/stats", get(stats))
        .route("/topics", get(list_topics).post(create_topic))
        .route("/topics/{name}", get(show_topic))
        .route("/topics/{name}/keywords", post(add_keywords))
        .route("/topics/{name}/expand", post(expand))
        .route("/topics/{name}/results", get(results))
        .route("/topics/{name}/trend", get(trend))
        .route("/topics/{name}/spikes", get(spikes))
        .route("/documents/{id}", get(document))
        .fallback(|| async {
            ApiError::from(Error::NotFound {
                kind: "route",
                key: String::new(),
            })
        })
        .with_state(engine)
}

#[derive(Debug, Default, Deserialize)]
struct StatsParams {
    top: Option<usize>,
}

async fn stats(
    State(engine): State<SharedEngine>,
    params: Result<Query<StatsParams>, QueryRejection>,
) -> ApiResult {
    let Query(params) = params?;
    let engine = engine.read()?;
    ok(views::stats(
        &engine,
        params.top.unwrap_or(views::DEFAULT_TOP),
    )?)
}

async fn list_topics(State(engine): State<SharedEngine>) -> ApiResult {
    ok(views::topics(&*engine.read()?)?)
}

#[derive(Debug, Deserialize)]
struct NewTopic {
    name: String,
    #[serde(default)]
    keywords: Vec<String>,
}

async fn create_topic(
    State(engine): State<SharedEngine>,
    body: Result<Json<NewTopic>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    if body.name.trim().is_empty() {
        return Err(ApiError::bad_request("topic name is empty"));
    }
    let mut engine = engine.write()?;
    let topic = engine.create_topic(&body.name, &body.keywords)?;
    engine.save()?;
    Ok(json_body(StatusCode::CREATED, views::to_json(&topic)?))
}

async fn show_topic(
    State(engine): State<SharedEngine>,
    UrlPath(name): UrlPath<String>,
) -> ApiResult {
    ok(views::topic(&*engine.read()?, &name)?)
}

#[derive(Debug, Deserialize)]
struct NewKeywords {
    keywords: Vec<String>,
}

async fn add_keywords(
    State(engine): State<SharedEngine>,
    UrlPath(name): UrlPath<String>,
    body: Result<Json<NewKeywords>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let mut engine = engine.write()?;
    let topic = engine.add_keywords(&name, &body.keywords)?;
    engine.save()?;
    ok(views::to_json(&topic)?)
}

#[derive(Debug, Default, Deserialize)]
struct ExpandRequest {
    theta: Option<f64>,
    limit: Option<usize>,
}

async fn expand(
    State(engine): State<SharedEngine>,
    UrlPath(name): UrlPath<String>,
    body: Result<Json<ExpandRequest>, JsonRejection>,
) -> ApiResult {
    let request = match body {
        Ok(Json(r)) => r,
        // An empty body means defaults.
        Err(JsonRejection::MissingJsonContentType(_)) => ExpandRequest::default(),
        Err(e) => return Err(e.into()),
    };
    ok(views::expand(
        &*engine.read()?,
        &name,
        request.theta,
        request.limit,
    )?)
}

#[derive(Debug, Default, Deserialize)]
struct ResultsParams {
    order: Option<String>,
    limit: Option<usize>,
}

async fn results(
    State(engine): State<SharedEngine>,
    UrlPath(name): UrlPath<String>,
    params: Result<Query<ResultsParams>, QueryRejection>,
) -> ApiResult {
    let Query(params) = params?;
    let order: ResultOrder = params
        .order
        .as_deref()
        .map(str::parse)
        .transpose()?
        .unwrap_or_default();
    ok(views::results(
        &*engine.read()?,
        &name,
        order,
        params.limit,
    )?)
}

#[derive(Debug, Default, Deserialize)]
struct TrendParams {
    granularity: Option<String>,
    from: Option<String>,
    to: Option<String>,
    window: Option<usize>,
    threshold: Option<f64>,
}

impl TrendParams {
    fn granularity(&self) -> Result<Granularity, Error> {
        Ok(self
            .granularity
            .as_deref()
            .map(str::parse)
            .transpose()?
            .unwrap_or(Granularity::Year))
    }
}

async fn trend(
    State(engine): State<SharedEngine>,
    UrlPath(name): UrlPath<String>,
    params: Result<Query<TrendParams>, QueryRejection>,
) -> ApiResult {
    let Query(p) = params?;
    let from = views::parse_opt_day(p.from.as_deref())?;
    let to = views::parse_opt_day(p.to.as_deref())?;
    ok(views::trend(
        &*engine.read()?,
        &name,
        p.granularity()?,
        from,
        to,
    )?)
}

async fn spikes(
    State(engine): State<SharedEngine>,
    UrlPath(name): UrlPath<String>,
    params: Result<Query<TrendParams>, QueryRejection>,
) -> ApiResult {
    let Query(p) = params?;
    let from = views::parse_opt_day(p.from.as_deref())?;
    let to = views::parse_opt_day(p.to.as_deref())?;
    let engine = engine.read()?;
    let config = spike_config(engine.config().spike, p.window, p.threshold);
    ok(views::spikes(
        &engine,
        &name,
        p.granularity()?,
        from,
        to,
        Some(config),
    )?)
}

pub fn spike_config(
    base: SpikeConfig,
    window: Option<usize>,
    threshold: Option<f64>,
) -> SpikeConfig {
    SpikeConfig {
        window: window.unwrap_or(base.window),
        threshold: threshold.unwrap_or(base.threshold),
        ..base
    }
}

#[derive(Debug, Default, Deserialize)]
struct DocumentParams {
    topic: Option<String>,
}

async fn document(
    State(engine): State<SharedEngine>,
    UrlPath(id): UrlPath<String>,
    params: Result<Query<DocumentParams>, QueryRejection>,
) -> ApiResult {
    let Query(p) = params?;
    ok(views::document(&*engine.read()?, &id, p.topic.as_deref())?)
}

/// Serves `router` on `bind` until ctrl-c or SIGTERM. The store's serve lock
/// is held for the lifetime of the service.
pub async fn serve(root: &Path, engine: Engine, bind: SocketAddr) -> anyhow::Result<()> {
    let _lock = ServeLock::acquire(root)?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {bind}: {e}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let app = router(Arc::new(RwLock::new(engine)));
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown())
        .await?;
    Ok(())
}

async fn shutdown() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
