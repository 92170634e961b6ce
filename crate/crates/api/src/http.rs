//! JSON over HTTP.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/ingest` | page JSONL, or `?path=` naming a file on the server |
//! | POST | `/classify` | `{"domain", "facet"}` |
//! | GET | `/leads` | `industries`, `roles` (comma separated), `min_prob`, `limit` |
//! | GET | `/companies/{domain}` | |
//! | GET | `/concepts/graph` | `theta` |
//! | GET | `/concepts/{id}/neighbors` | `min_weight` |
//! | GET | `/clusters`, `/clusters/{id}` | |
//! | POST | `/clusters/{id}/decision` | `{"status", "merge_into"?}`, actor from `X-Actor` |

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{ApiError, ApiResult};
use crate::service::{to_json, Decision, LeadQuery, Service};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(to_json(&self))).into_response()
    }
}

type Shared = Arc<Service>;
type JsonResult = ApiResult<Json<Value>>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str, default: T) -> ApiResult<T> {
    match q.get(name) {
        None => Ok(default),
        Some(raw) => raw.trim().parse().map_err(|_| ApiError::bad_request(format!("invalid {name}: {raw:?}"))),
    }
}

fn label_set(q: &HashMap<String, String>, name: &str) -> std::collections::BTreeSet<String> {
    q.get(name)
        .map(|raw| raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
        .unwrap_or_default()
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn ingest(State(svc): State<Shared>, Query(q): Query<HashMap<String, String>>, body: Bytes) -> JsonResult {
    let report = match q.get("path") {
        Some(path) => {
            let path = PathBuf::from(path);
            blocking(move || svc.ingest_path(&path)).await?
        }
        None => {
            let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
            blocking(move || svc.ingest_jsonl(&text)).await?
        }
    };
    Ok(Json(to_json(&report)))
}

#[derive(Deserialize)]
struct ClassifyRequest {
    domain: String,
    facet: String,
}

async fn classify(State(svc): State<Shared>, body: Bytes) -> JsonResult {
    let req: ClassifyRequest = parse_body(&body)?;
    let out = blocking(move || svc.classify(&req.domain, &req.facet)).await?;
    Ok(Json(to_json(&out)))
}

async fn leads(State(svc): State<Shared>, Query(q): Query<HashMap<String, String>>) -> JsonResult {
    let defaults = LeadQuery::default();
    let query = LeadQuery {
        industries: label_set(&q, "industries"),
        roles: label_set(&q, "roles"),
        min_prob: param(&q, "min_prob", defaults.min_prob)?,
        limit: param(&q, "limit", defaults.limit)?,
    };
    Ok(Json(to_json(&svc.leads(&query)?)))
}

async fn company(State(svc): State<Shared>, Path(domain): Path<String>) -> JsonResult {
    Ok(Json(to_json(&svc.company(&domain)?)))
}

async fn concept_graph(State(svc): State<Shared>, Query(q): Query<HashMap<String, String>>) -> JsonResult {
    let theta = param(&q, "theta", svc.config().concepts.theta)?;
    Ok(Json(to_json(&svc.concept_graph(theta)?)))
}

async fn concept_neighbors(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> JsonResult {
    let min_weight = param(&q, "min_weight", 0.0)?;
    Ok(Json(to_json(&svc.concept_neighbors(&id, min_weight)?)))
}

async fn clusters(State(svc): State<Shared>) -> Json<Value> {
    Json(to_json(&svc.clusters()))
}

async fn cluster(State(svc): State<Shared>, Path(id): Path<String>) -> JsonResult {
    Ok(Json(to_json(&svc.cluster(&id)?)))
}

async fn decide(State(svc): State<Shared>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> JsonResult {
    let decision: Decision = parse_body(&body)?;
    let actor = headers.get("x-actor").and_then(|v| v.to_str().ok()).unwrap_or("anonymous").to_string();
    let out = blocking(move || svc.decide(&id, &decision, &actor)).await?;
    Ok(Json(to_json(&out)))
}

async fn require_token(State(token): State<Arc<String>>, request: Request, next: Next) -> Response {
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token.as_str()) {
        next.run(request).await
    } else {
        ApiError::new(401, "missing or invalid token").into_response()
    }
}

pub fn router(service: Arc<Service>) -> Router {
    let token = service.config().token.clone();
    let app = Router::new()
        .route("/health", get(health))
        .route("/ingest", post(ingest))
        .route("/classify", post(classify))
        .route("/leads", get(leads))
        .route("/companies/{domain}", get(company))
        .route("/concepts/graph", get(concept_graph))
        .route("/concepts/{id}/neighbors", get(concept_neighbors))
        .route("/clusters", get(clusters))
        .route("/clusters/{id}", get(cluster))
        .route("/clusters/{id}/decision", post(decide))
        .with_state(service);
    match token {
        Some(t) => app.layer(middleware::from_fn_with_state(Arc::new(t), require_token)),
        None => app,
    }
}

/// Serves until interrupted.
pub async fn serve(service: Arc<Service>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&service.config().listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
