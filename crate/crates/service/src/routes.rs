use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use shelfwise_core::EventLog;

use crate::api::{self, ApiError, AnalyzeRequest, SimulateRequest, SweepRequest};
use crate::state::SharedState;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.kind.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/products", get(products))
        .route("/analyze", post(analyze))
        .route("/sweep", post(sweep))
        .route("/simulate", post(simulate))
        .with_state(state)
}

fn json_bytes(body: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse<R: DeserializeOwned>(body: &[u8]) -> Result<R, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("malformed request body: {e}")))
}

/// Runs `compute` on the blocking pool, memoised by endpoint and request.
async fn cached<R, F, O>(state: SharedState, endpoint: &str, body: Bytes, compute: F) -> Result<Response, ApiError>
where
    R: DeserializeOwned + Serialize + Send + 'static,
    F: FnOnce(&EventLog, &R) -> Result<O, ApiError> + Send + 'static,
    O: Serialize,
{
    if state.log().is_none() {
        return Err(ApiError::no_log());
    }
    let request: R = parse(&body)?;
    // Keyed on the re-serialized request so formatting differences share an entry.
    let key = format!("{endpoint} {}", serde_json::to_string(&request).expect("request serializes"));
    if let Some(hit) = state.cached(&key) {
        return Ok(json_bytes(hit));
    }
    let worker = state.clone();
    let body = tokio::task::spawn_blocking(move || {
        let log = worker.log().expect("checked above");
        compute(log, &request).map(|out| Bytes::from(serde_json::to_vec(&out).expect("response serializes")))
    })
    .await
    .map_err(|e| ApiError::new(api::ErrorKind::SolverFailure, format!("worker failed: {e}")))??;
    state.remember(key, body.clone());
    Ok(json_bytes(body))
}

async fn health(State(state): State<SharedState>) -> Response {
    match state.fingerprint() {
        Some(f) => Json(json!({ "status": "ok", "fingerprint": f })).into_response(),
        None => Json(json!({ "status": "ok" })).into_response(),
    }
}

async fn products(State(state): State<SharedState>) -> Result<Response, ApiError> {
    if state.log().is_none() {
        return Err(ApiError::no_log());
    }
    Ok(Json(state.products()).into_response())
}

async fn analyze(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    cached::<AnalyzeRequest, _, _>(state, "analyze", body, api::analyze).await
}

async fn sweep(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    cached::<SweepRequest, _, _>(state, "sweep", body, api::sweep).await
}

async fn simulate(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    // Simulations can run for a while; beyond the worker count they queue here.
    let _permit = state.simulations.acquire().await.expect("semaphore is never closed");
    cached::<SimulateRequest, _, _>(state.clone(), "simulate", body, api::simulate).await
}
