use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fairfront::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                detail,
            },
        }
    }

    pub fn core(status: StatusCode, e: &Error) -> Self {
        ApiError {
            status,
            body: body_of(e),
        }
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "UnknownSession",
            format!("no session {id:?}"),
            json!({ "session": id }),
        )
    }
}

pub fn body_of(e: &Error) -> ErrorBody {
    let detail = match e {
        Error::SchemaViolation { path, reason } => json!({ "path": path, "reason": reason }),
        Error::BadScore { row, column, value }
        | Error::BadOutcome { row, column, value }
        | Error::BadAmount { row, column, value }
        | Error::DuplicateId { row, column, value } => {
            json!({ "row": row, "column": column, "value": value })
        }
        Error::Csv { row, reason } => json!({ "row": row, "reason": reason }),
        Error::MissingColumn(c) | Error::DuplicateColumn(c) => json!({ "column": c }),
        Error::EmptyPosition(g) => json!({ "position": g }),
        Error::SweepTooLarge { size, cap } => json!({ "size": size.to_string(), "cap": cap }),
        Error::WeightLengthMismatch { expected, actual } => {
            json!({ "expected": expected, "actual": actual })
        }
        _ => Value::Null,
    };
    ErrorBody {
        code: e.code().into(),
        message: e.to_string(),
        detail,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
