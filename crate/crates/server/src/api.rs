//! Routes:
//!
//! | method | path                       | body                         |
//! |--------|----------------------------|------------------------------|
//! | POST   | `/sessions`                | [`CreateSession`]            |
//! | GET    | `/sessions/{id}`           |                              |
//! | POST   | `/sessions/{id}/preference`| `{"stated_pref": 0..=100}`   |
//! | POST   | `/sessions/{id}/ready`     |                              |
//! | POST   | `/sessions/{id}/decision`  | `{"chosen": 0 \| 1}`         |
//! | POST   | `/sessions/{id}/trust`     | `{"slider": 0..=100, even}`  |
//! | GET    | `/sessions/{id}/summary`   |                              |
//! | GET    | `/sessions/{id}/events`    | server-sent snapshots        |
//!
//! Errors are `{"code", "message", "expected_phase"?}`.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use trustmdp::service::{CreateSession, Phase, ServiceError, SessionManager, Snapshot};
use trustmdp::Action;

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<SessionManager>,
    updates: broadcast::Sender<Snapshot>,
}

impl AppState {
    pub fn new(sessions: SessionManager) -> Self {
        let (updates, _) = broadcast::channel(256);
        AppState {
            sessions: Arc::new(sessions),
            updates,
        }
    }

    fn publish(&self, id: &str) {
        if let Ok(snapshot) = self.sessions.get_state(id) {
            // no subscribers is fine
            let _ = self.updates.send(snapshot);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_phase: Option<Phase>,
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Protocol { .. } => StatusCode::CONFLICT,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
            expected_phase: e.expected_phase(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "validation_error",
            message: r.body_text(),
            expected_phase: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
struct DecisionBody {
    chosen: Action,
}

#[derive(Debug, Deserialize)]
struct SliderBody {
    slider: u32,
}

#[derive(Debug, Deserialize)]
struct PreferenceBody {
    stated_pref: u32,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/preference", post(preference))
        .route("/sessions/{id}/ready", post(ready))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/trust", post(trust))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

async fn create(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<trustmdp::service::Created>), ApiError> {
    let Json(req) = body?;
    let created = app.sessions.create(&req)?;
    app.publish(&created.id);
    Ok((StatusCode::CREATED, Json(created)))
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Snapshot> {
    Ok(Json(app.sessions.get_state(&id)?))
}

async fn preference(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<PreferenceBody>, JsonRejection>,
) -> ApiResult<Snapshot> {
    let Json(b) = body?;
    let out = app.sessions.submit_preference(&id, b.stated_pref)?;
    app.publish(&id);
    Ok(Json(out))
}

async fn ready(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Snapshot> {
    let out = app.sessions.ready(&id)?;
    app.publish(&id);
    Ok(Json(out))
}

async fn decision(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> ApiResult<trustmdp::experiment::OutcomeReport> {
    let Json(b) = body?;
    let out = app.sessions.submit_decision(&id, b.chosen)?;
    app.publish(&id);
    Ok(Json(out))
}

async fn trust(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SliderBody>, JsonRejection>,
) -> ApiResult<trustmdp::service::TrustResponse> {
    let Json(b) = body?;
    let out = app.sessions.submit_trust(&id, b.slider)?;
    app.publish(&id);
    Ok(Json(out))
}

async fn summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<trustmdp::Metrics> {
    Ok(Json(app.sessions.summary(&id)?))
}

fn sse_event(s: &Snapshot) -> Event {
    Event::default()
        .event("phase")
        .json_data(s)
        .expect("snapshot serializes")
}

/// Current snapshot first, then one event per accepted mutation. The stream
/// ends after the mission's `DONE` snapshot.
async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let rx = app.updates.subscribe();
    let first = app.sessions.get_state(&id)?;
    let done = first.phase == Phase::Done;
    let head = stream::iter(vec![first.clone()]);
    let tail = stream::unfold((rx, id, done), |(mut rx, id, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(s) if s.id == id => {
                    let finished = s.phase == Phase::Done;
                    return Some((s, (rx, id, finished)));
                }
                Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let body = head.chain(tail).map(|s| Ok(sse_event(&s)));
    Ok(Sse::new(body).keep_alive(KeepAlive::default()))
}
