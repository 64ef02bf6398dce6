use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    job_id: Option<&'a str>,
}

/// JSON error response: `{"error": message, "kind": kind}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub job_id: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            job_id: None,
        }
    }

    pub fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn building(job_id: String) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            kind: "MatrixBuilding",
            message: "distance matrix build in progress; poll the job".into(),
            job_id: Some(job_id),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.message,
            kind: self.kind,
            job_id: self.job_id.as_deref(),
        };
        (self.status, Json(body)).into_response()
    }
}

pub fn ingest_error_kind(e: &repsel_core::IngestError) -> &'static str {
    use repsel_core::IngestError::*;
    match e {
        EmptySource => "EmptySource",
        HeaderMissing => "HeaderMissing",
        RowOverflow(_) => "RowOverflow",
        DuplicateColumn(_) => "DuplicateColumn",
        NoNumericColumns => "NoNumericColumns",
        NoUsableSeries => "NoUsableSeries",
        UnknownTimeColumn(_) => "UnknownTimeColumn",
        NoUsableTimestamps(_) => "NoUsableTimestamps",
        InvalidThreshold(_) => "InvalidThreshold",
        InvalidDelimiter(_) => "InvalidDelimiter",
        Csv(_) => "MalformedCsv",
    }
}
