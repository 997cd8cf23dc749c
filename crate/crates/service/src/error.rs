use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lessons_core::orchestrator::OrchestratorError;
use serde::{Deserialize, Serialize};

/// JSON error body: `{"error": kind, "message": text}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { error: error.to_string(), message: message.into() } }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let status = match &e {
            OrchestratorError::Conflict(_) => StatusCode::CONFLICT,
            OrchestratorError::EmptyInput | OrchestratorError::BadRequest(_) => StatusCode::BAD_REQUEST,
            OrchestratorError::MissingGroundTruth(_) | OrchestratorError::Scenario(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            OrchestratorError::Knowledge(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let kind = serde_json::to_value(&e)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
            .unwrap_or_else(|| "error".into());
        ApiError::new(status, &kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
