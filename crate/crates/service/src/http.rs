//! axum routes over [`TuningService`].
//!
//! Bodies are read as raw bytes and parsed by the service so that every
//! malformed document maps to 400, independent of the extractor's own
//! rejection codes. Tuner work runs on the blocking pool.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::api::{BudgetRequest, CreateTaskRequest, ObservationRequest};
use crate::service::{parse_body, ServiceError, TuningService};

type Shared = Arc<TuningService>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/tasks", post(create).get(list))
        .route("/tasks/{id}", get(status))
        .route("/tasks/{id}/suggestion", get(suggestion))
        .route("/tasks/{id}/observation", post(observe))
        .route("/tasks/{id}/stop", post(stop))
        .route("/tasks/{id}/budget", post(budget))
        .with_state(service)
}

pub async fn serve(service: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status() >= 500 {
            tracing::error!("{self}");
        }
        let code = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (code, Json(self.body())).into_response()
    }
}

async fn run<T, F>(service: Shared, ok: StatusCode, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&TuningService) -> Result<T, ServiceError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&service)).await {
        Ok(Ok(v)) => (ok, Json(v)).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(format!("request handler failed: {e}")).into_response(),
    }
}

async fn create(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, StatusCode::CREATED, move |s| s.create(parse_body::<CreateTaskRequest>(&body)?)).await
}

async fn list(State(s): State<Shared>) -> Response {
    run(s, StatusCode::OK, |s| Ok(s.list())).await
}

async fn status(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    run(s, StatusCode::OK, move |s| s.status(&id)).await
}

async fn suggestion(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    run(s, StatusCode::OK, move |s| s.suggestion(&id)).await
}

async fn observe(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    run(s, StatusCode::OK, move |s| {
        // unknown tasks are 404 even when the body is malformed
        s.ensure_exists(&id)?;
        s.observe(&id, parse_body::<ObservationRequest>(&body)?)
    })
    .await
}

async fn stop(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    run(s, StatusCode::OK, move |s| s.stop(&id)).await
}

async fn budget(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    run(s, StatusCode::OK, move |s| {
        s.ensure_exists(&id)?;
        s.extend_budget(&id, parse_body::<BudgetRequest>(&body)?)
    })
    .await
}
