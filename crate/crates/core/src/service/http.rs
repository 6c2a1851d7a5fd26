//! HTTP endpoints over [`Platform`].
//!
//! | method | path                          | body / result                  |
//! |--------|-------------------------------|--------------------------------|
//! | POST   | `/tasks`                      | task spec → `201` created task |
//! | POST   | `/tasks/{id}/submissions`     | submission → verdict receipt   |
//! | GET    | `/tasks/{id}`                 | counters, verdicts, tree       |
//! | POST   | `/tasks/{id}/close`           | aggregation report             |
//! | GET    | `/tasks/{id}/report`          | stored report, `404` if open   |
//!
//! Errors are JSON objects `{"error": <code>, "message": <text>}`; task
//! validation failures add a `violations` array.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use super::{Platform, ServiceError};
use crate::model::{Submission, TaskSpec};

impl ServiceError {
    pub fn status_code(&self) -> StatusCode {
        match self {
            ServiceError::InvalidTask(_)
            | ServiceError::DeadlineInPast { .. }
            | ServiceError::OutsideWindow { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Malformed(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownTask(_) | ServiceError::ReportNotReady(_) => StatusCode::NOT_FOUND,
            ServiceError::TaskIdTaken(_)
            | ServiceError::TaskClosed(_)
            | ServiceError::DuplicateSubmission(_) => StatusCode::CONFLICT,
            ServiceError::Storage(_) | ServiceError::Replay(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidTask(_) => "invalid_task",
            ServiceError::DeadlineInPast { .. } => "deadline_in_past",
            ServiceError::TaskIdTaken(_) => "task_id_taken",
            ServiceError::UnknownTask(_) => "unknown_task",
            ServiceError::TaskClosed(_) => "task_closed",
            ServiceError::OutsideWindow { .. } => "outside_window",
            ServiceError::DuplicateSubmission(_) => "duplicate_submission",
            ServiceError::Malformed(_) => "malformed",
            ServiceError::ReportNotReady(_) => "report_not_ready",
            ServiceError::Storage(_) => "storage",
            ServiceError::Replay(_) => "replay",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ServiceError::InvalidTask(rejection) = &self {
            body["violations"] = serde_json::to_value(&rejection.violations).unwrap_or(Value::Null);
        }
        (self.status_code(), Json(body)).into_response()
    }
}

type Shared = Arc<Platform>;

pub fn router(platform: Shared) -> Router {
    Router::new()
        .route("/tasks", post(create_task))
        .route("/tasks/{id}", get(get_status))
        .route("/tasks/{id}/submissions", post(submit))
        .route("/tasks/{id}/close", post(close_task))
        .route("/tasks/{id}/report", get(get_report))
        .with_state(platform)
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Malformed(format!("request handler failed: {e}")))?
}

async fn create_task(
    State(p): State<Shared>,
    Json(body): Json<Value>,
) -> Result<Response, ServiceError> {
    let spec: TaskSpec =
        serde_json::from_value(body).map_err(|e| ServiceError::Malformed(e.to_string()))?;
    let created = blocking(move || p.create_task(spec)).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn submit(
    State(p): State<Shared>,
    Path(id): Path<String>,
    Json(mut body): Json<Value>,
) -> Result<Response, ServiceError> {
    if let Some(obj) = body.as_object_mut() {
        obj.entry("task_id")
            .or_insert_with(|| Value::String(id.clone()));
    }
    let submission: Submission =
        serde_json::from_value(body).map_err(|e| ServiceError::Malformed(e.to_string()))?;
    let receipt = blocking(move || p.submit(&id, submission)).await?;
    Ok(Json(receipt).into_response())
}

async fn get_status(
    State(p): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    Ok(Json(p.status(&id)?).into_response())
}

async fn close_task(
    State(p): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let report = blocking(move || p.close_task(&id)).await?;
    Ok(Json(report).into_response())
}

async fn get_report(
    State(p): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    Ok(Json(p.report(&id)?).into_response())
}

/// Serves the API on `addr` and closes overdue tasks every `tick`. Runs
/// until ctrl-c.
pub async fn serve(platform: Shared, addr: SocketAddr, tick: Duration) -> std::io::Result<()> {
    let ticker = {
        let platform = platform.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(tick);
            loop {
                interval.tick().await;
                let p = platform.clone();
                let now = p.now();
                match tokio::task::spawn_blocking(move || p.tick(now)).await {
                    Ok(Err(e)) => log::error!("deadline tick failed: {e}"),
                    Err(e) => log::error!("deadline tick panicked: {e}"),
                    Ok(Ok(_)) => {}
                }
            }
        })
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let result = axum::serve(listener, router(platform))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    ticker.abort();
    result
}
