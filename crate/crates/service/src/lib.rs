//! HTTP API for the human-guesser study: the trained questioner and the
//! Oracle play, a person watches the dialog and picks the object.

pub mod study;

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

pub use study::{
    load_checkpoints, system_clock, Clock, CreateRequest, GuessView, Questioner, SessionView, StepView, Study,
    StudyError, StudyOptions,
};

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let status = match &self {
            StudyError::NotFound(_) => StatusCode::NOT_FOUND,
            StudyError::Conflict(_) => StatusCode::CONFLICT,
            StudyError::BadRequest(_) => StatusCode::BAD_REQUEST,
            StudyError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, StudyError> {
    payload.map(|Json(v)| v).map_err(|e| StudyError::BadRequest(e.body_text()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GuessRequest {
    object_id: usize,
}

async fn create(
    State(study): State<Arc<Study>>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), StudyError> {
    let req = body(payload)?;
    Ok((StatusCode::CREATED, Json(study.create(req)?)))
}

async fn show(State(study): State<Arc<Study>>, Path(id): Path<String>) -> Result<Json<SessionView>, StudyError> {
    Ok(Json(study.get(&id)?))
}

async fn step(State(study): State<Arc<Study>>, Path(id): Path<String>) -> Result<Json<StepView>, StudyError> {
    Ok(Json(study.step(&id)?))
}

async fn guess(
    State(study): State<Arc<Study>>,
    Path(id): Path<String>,
    payload: Result<Json<GuessRequest>, JsonRejection>,
) -> Result<Json<GuessView>, StudyError> {
    let req = body(payload)?;
    Ok(Json(study.guess(&id, req.object_id)?))
}

async fn summary(State(study): State<Arc<Study>>) -> Result<Response, StudyError> {
    Ok(Json(study.summary()?).into_response())
}

async fn healthz(State(study): State<Arc<Study>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "checkpoints": study.checkpoints() }))
}

pub fn router(study: Arc<Study>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/guess", post(guess))
        .route("/study/summary", get(summary))
        .route("/healthz", get(healthz))
        .with_state(study)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(study: Arc<Study>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(study)).await
}
