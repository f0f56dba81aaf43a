use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;

use crate::state::{FoldError, Phase};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    /// Dotted path of the offending field in the request body.
    pub field: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("no session '{0}'")]
    NotFound(String),

    #[error("{message} (phase is {phase})")]
    Phase { phase: Phase, message: String },

    #[error("a response for interaction {m} was already recorded")]
    Duplicate { m: usize },

    #[error("{0}")]
    Mode(String),

    #[error("invalid request")]
    Validation(Vec<FieldError>),

    #[error(transparent)]
    Engine(#[from] prefbo::Error),

    #[error(transparent)]
    Fold(#[from] FoldError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ApiError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::Validation(vec![FieldError {
            field: field.into(),
            message: message.into(),
        }])
    }

    pub fn phase(phase: Phase, message: impl Into<String>) -> Self {
        ApiError::Phase {
            phase,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Phase { .. } => "phase",
            ApiError::Duplicate { .. } => "duplicate",
            ApiError::Mode(_) => "mode",
            ApiError::Validation(_) => "validation",
            ApiError::Engine(_) | ApiError::Fold(_) | ApiError::Io(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Phase { .. } | ApiError::Duplicate { .. } | ApiError::Mode(_) => StatusCode::CONFLICT,
            ApiError::Validation(_) => StatusCode::BAD_REQUEST,
            ApiError::Engine(_) | ApiError::Fold(_) | ApiError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase: Option<Phase>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fields: &'a [FieldError],
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!("{self}");
        }
        let body = ErrorBody {
            kind: self.kind(),
            message: self.to_string(),
            phase: match &self {
                ApiError::Phase { phase, .. } => Some(*phase),
                _ => None,
            },
            fields: match &self {
                ApiError::Validation(f) => f,
                _ => &[],
            },
        };
        (self.status(), axum::Json(serde_json::json!({ "error": body }))).into_response()
    }
}
