//! JSON-over-HTTP wire API.

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bws_core::scoring::AnnotatorStatus;
use bws_core::{PostId, TupleId};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::service::SharedService;
use crate::state::{AnnotatorRecord, Millis};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorView {
    pub annotator_id: String,
    pub status: AnnotatorStatus,
    pub gold_judgments: u32,
    pub gold_accuracy: Option<f64>,
}

impl From<&AnnotatorRecord> for AnnotatorView {
    fn from(a: &AnnotatorRecord) -> Self {
        Self {
            annotator_id: a.annotator_id.clone(),
            status: a.status,
            gold_judgments: a.gold_judgments,
            gold_accuracy: a.gold_accuracy(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct NextQuery {
    pub annotator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPost {
    pub post_id: PostId,
    pub text: String,
}

/// Assignment as sent to clients; gold tuples are not marked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResponse {
    pub tuple_id: TupleId,
    pub annotator_id: String,
    pub issued_at: Millis,
    pub expires_at: Millis,
    pub display_order: [PostId; 4],
    pub posts: Vec<TaskPost>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub annotator_id: String,
    pub tuple_id: TupleId,
    pub best_post_id: PostId,
    pub worst_post_id: PostId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub accepted: bool,
    /// Present when the judgment was on a gold tuple.
    pub profile: Option<AnnotatorView>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub include_excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ServiceError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ServiceError::NoAssignment { .. } => (StatusCode::CONFLICT, "no_assignment"),
            ServiceError::Duplicate { .. } => (StatusCode::CONFLICT, "duplicate"),
            ServiceError::RejectedAnnotator(_) => (StatusCode::FORBIDDEN, "rejected_annotator"),
            ServiceError::UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "unknown_annotator"),
            ServiceError::UnknownTuple(_) => (StatusCode::NOT_FOUND, "unknown_tuple"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let body = ErrorBody {
            kind: kind.to_string(),
            error: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(service: SharedService) -> Router {
    Router::new()
        .route("/annotators", post(register))
        .route("/tasks/next", get(next_task))
        .route("/judgments", post(submit))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .with_state(service)
}

/// Serves the API until the listener fails.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: SharedService,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

fn lock(service: &SharedService) -> std::sync::MutexGuard<'_, crate::service::Service> {
    service
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn register(
    State(service): State<SharedService>,
    Json(req): Json<RegisterRequest>,
) -> Result<(StatusCode, Json<AnnotatorView>), ServiceError> {
    let mut svc = lock(&service);
    let existed = svc.state().annotator(&req.id).is_some();
    let record = svc.register(&req.id)?;
    let status = if existed {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((status, Json(AnnotatorView::from(&record))))
}

async fn next_task(
    State(service): State<SharedService>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ServiceError> {
    let mut svc = lock(&service);
    let Some(a) = svc.next_tuple(&q.annotator)? else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let posts = a
        .display_order
        .iter()
        .map(|&id| TaskPost {
            post_id: id,
            text: svc.state().post_text(id).unwrap_or_default().to_string(),
        })
        .collect();
    Ok(Json(TaskResponse {
        tuple_id: a.tuple_id,
        annotator_id: a.annotator_id,
        issued_at: a.issued_at,
        expires_at: a.expires_at,
        display_order: a.display_order,
        posts,
    })
    .into_response())
}

async fn submit(
    State(service): State<SharedService>,
    Json(req): Json<SubmitRequest>,
) -> Result<Json<SubmitResponse>, ServiceError> {
    let mut svc = lock(&service);
    let outcome = svc.submit(
        &req.annotator_id,
        req.tuple_id,
        req.best_post_id,
        req.worst_post_id,
    )?;
    Ok(Json(SubmitResponse {
        accepted: true,
        profile: outcome
            .gold
            .then(|| AnnotatorView::from(&outcome.annotator)),
    }))
}

async fn progress(State(service): State<SharedService>) -> Json<crate::state::Progress> {
    Json(lock(&service).progress())
}

async fn export(State(service): State<SharedService>, Query(q): Query<ExportQuery>) -> Response {
    let judgments = lock(&service).export_judgments(q.include_excluded);
    let mut body = String::new();
    for j in &judgments {
        body.push_str(&serde_json::to_string(j).expect("judgments serialize"));
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}
