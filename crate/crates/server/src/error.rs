use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ke_core::EngineError;
use serde_json::json;

/// Error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError(pub EngineError);

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self(EngineError::new("BAD_REQUEST", message))
    }

    pub fn status(&self) -> StatusCode {
        match self.0.code.as_str() {
            "UNKNOWN_SESSION" | "UNKNOWN_TURN" | "UNKNOWN_EDGE" | "UNKNOWN_ID" | "UNKNOWN_UNDO_TOKEN"
            | "NO_TRACE" | "NOT_FOUND" => StatusCode::NOT_FOUND,
            "ALREADY_DELETED" | "NOT_DELETED" => StatusCode::CONFLICT,
            "PROTECTED_EDGE" => StatusCode::FORBIDDEN,
            "BAD_REQUEST" => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.0.code, "message": self.0.message } });
        (self.status(), Json(body)).into_response()
    }
}
