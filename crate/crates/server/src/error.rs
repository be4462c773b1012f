use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use interplay_core::calibration::CalibrationError;
use interplay_core::session::SessionError;
use interplay_core::sketcher::SketcherError;
use interplay_core::vision::VisionError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Error body returned by every endpoint: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                detail: Value::Null,
            },
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.body.detail = detail;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no {what} {id:?}"),
        )
        .with_detail(json!({ "id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let status = match &e {
            TurnViolation { .. }
            | Closed
            | SuggestionPending
            | NoSuggestion
            | NotAVoter(_)
            | EmptyContext(_) => StatusCode::CONFLICT,
            InvalidTheme(_) | InvalidTurnOrder(_) | Channel(_) | InvalidInput(_) | Stroke(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Sketcher(SketcherError::InvalidInput(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            Sketcher(_) | Replay { .. } | Journal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let detail = match &e {
            TurnViolation { expected, got } => json!({ "expected": expected, "got": got }),
            NotAVoter(p) => json!({ "player": p }),
            _ => Value::Null,
        };
        Self::new(status, e.code(), e.to_string()).with_detail(detail)
    }
}

impl From<CalibrationError> for ApiError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::MissingMap { from, to } => {
                Self::new(StatusCode::CONFLICT, "calibration_missing", e.to_string())
                    .with_detail(json!({ "from": from, "to": to }))
            }
            _ => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "calibration_error",
                e.to_string(),
            ),
        }
    }
}

impl From<VisionError> for ApiError {
    fn from(e: VisionError) -> Self {
        match e {
            VisionError::Calibration(c) => c.into(),
            VisionError::Io(_) => Self::internal(e.to_string()),
            _ => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "vision_error",
                e.to_string(),
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
