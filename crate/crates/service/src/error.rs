use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde_json::json;

/// An error response: `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self { status, kind: kind.to_string(), message: message.into() }
    }

    pub fn invalid_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidBody", message)
    }

    pub fn not_ready() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "NotReady", "dataset is still loading")
    }
}

impl From<assortify::Error> for ApiError {
    fn from(err: assortify::Error) -> Self {
        let status = match err.kind() {
            "InvalidLocks" | "InvalidRequest" | "InvalidConfig" => StatusCode::BAD_REQUEST,
            "UnknownStore" | "UnknownProduct" => StatusCode::NOT_FOUND,
            "InsufficientCandidates" => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, err.kind(), err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, axum::Json(body)).into_response()
    }
}
