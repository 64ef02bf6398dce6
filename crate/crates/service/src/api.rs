//! HTTP routes.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use repsel_core::m4::display_downsample;
use repsel_core::model::CategoricalColumn;
use repsel_core::stats::{series_summary, BoxSummary};
use repsel_core::{
    dtw_evaluations, greedy_select, ingest, Dataset, DatasetId, DistanceMatrix, IngestReport,
    M4Sample, MatrixParams, PreprocessConfig, SelectionError, SelectionParams, SelectionResult,
    DEFAULT_SEGMENTS,
};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::error::{ingest_error_kind, ApiError};
use crate::state::{AppState, JobPhase, JobStatus, MatrixLookup};

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Display width used when `/series` is called without `width`.
const DEFAULT_WIDTH: usize = 1000;

pub fn router(state: AppState) -> Router {
    let limit = state.config().upload_limit;
    Router::new()
        .route("/datasets", post(upload).get(list_datasets))
        .route("/datasets/{id}", get(dataset_info))
        .route("/datasets/{id}/series", get(series))
        .route("/datasets/{id}/summary", get(summary))
        .route("/datasets/{id}/select", post(select))
        .route("/datasets/{id}/matrix", get(matrix))
        .route("/jobs/{id}", get(job))
        .route("/metrics", get(metrics))
        .layer(DefaultBodyLimit::max(limit))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadResponse {
    pub dataset_id: DatasetId,
    pub job_id: String,
    pub report: IngestReport,
}

async fn upload(
    State(state): State<AppState>,
    mut multipart: Multipart,
) -> ApiResult<UploadResponse> {
    let mut source: Option<(Vec<u8>, Option<String>)> = None;
    let mut config = PreprocessConfig::default();
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        match field.name() {
            Some("file") => {
                let name = field.file_name().map(str::to_string);
                let bytes = field.bytes().await.map_err(multipart_error)?;
                source = Some((bytes.to_vec(), name));
            }
            Some("config") => {
                let bytes = field.bytes().await.map_err(multipart_error)?;
                config = serde_json::from_slice(&bytes)
                    .map_err(|e| ApiError::bad_request("InvalidConfig", e.to_string()))?;
            }
            _ => {}
        }
    }
    let (bytes, name) = source.ok_or_else(|| {
        ApiError::bad_request("MissingFile", "multipart field `file` is required")
    })?;

    let job = state.new_job(JobPhase::Ingesting);
    let ingested = tokio::task::spawn_blocking(move || ingest(&bytes, &config, name))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let (dataset, report) = match ingested {
        Ok(v) => v,
        Err(e) => {
            job.fail(e.to_string());
            return Err(ApiError::bad_request(ingest_error_kind(&e), e.to_string()));
        }
    };
    let dataset = state
        .insert_dataset(dataset)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let mut params = state.config().default_params;
    params.k = params.k.min(dataset.len());
    let job = state
        .ensure_matrix(dataset.clone(), params, job)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(UploadResponse {
        dataset_id: dataset.id.clone(),
        job_id: job.id(),
        report,
    }))
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    let status = e.status();
    let kind = if status == StatusCode::PAYLOAD_TOO_LARGE {
        "PayloadTooLarge"
    } else {
        "MalformedMultipart"
    };
    ApiError::new(status, kind, e.body_text())
}

fn find_dataset(state: &AppState, id: &str) -> Result<Arc<Dataset>, ApiError> {
    state
        .dataset(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown dataset {id}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: DatasetId,
    pub source: Option<String>,
    pub row_count: usize,
    pub series: Vec<SeriesInfo>,
    pub categorical_columns: Vec<CategoricalColumn>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesInfo {
    pub index: usize,
    pub name: String,
    pub points: usize,
}

fn info(ds: &Dataset) -> DatasetInfo {
    DatasetInfo {
        id: ds.id.clone(),
        source: ds.provenance.source.clone(),
        row_count: ds.provenance.row_count,
        series: ds
            .series
            .iter()
            .enumerate()
            .map(|(index, s)| SeriesInfo {
                index,
                name: s.name.clone(),
                points: s.len(),
            })
            .collect(),
        categorical_columns: ds.categorical_columns.clone(),
        warnings: ds.provenance.warnings.clone(),
    }
}

async fn list_datasets(State(state): State<AppState>) -> ApiResult<Vec<DatasetInfo>> {
    Ok(Json(state.datasets().iter().map(|d| info(d)).collect()))
}

async fn dataset_info(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<DatasetInfo> {
    let ds = find_dataset(&state, &id)?;
    Ok(Json(info(&ds)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesPayload {
    pub name: String,
    pub total_points: usize,
    #[serde(flatten)]
    pub sample: M4Sample,
}

async fn series(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Vec<SeriesPayload>> {
    let ds = find_dataset(&state, &id)?;
    let width = match query.get("width") {
        None => DEFAULT_WIDTH,
        Some(w) => w.parse::<usize>().ok().filter(|&w| w >= 1).ok_or_else(|| {
            ApiError::bad_request(
                "BadWidth",
                format!("width must be a positive integer, got {w:?}"),
            )
        })?,
    };
    let selected: Vec<&repsel_core::TimeSeries> = match query.get("names").filter(|n| !n.is_empty())
    {
        None => ds.series.iter().collect(),
        Some(names) => names
            .split(',')
            .map(|name| {
                ds.series_by_name(name)
                    .ok_or_else(|| ApiError::not_found(format!("unknown series {name:?}")))
            })
            .collect::<Result<_, _>>()?,
    };
    let out = selected
        .into_iter()
        .map(|s| {
            let sample =
                display_downsample(s, width).map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(SeriesPayload {
                name: s.name.clone(),
                total_points: s.len(),
                sample,
            })
        })
        .collect::<Result<_, ApiError>>()?;
    Ok(Json(out))
}

async fn summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Vec<BoxSummary>> {
    let ds = find_dataset(&state, &id)?;
    Ok(Json(ds.series.iter().filter_map(series_summary).collect()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectRequest {
    pub k: usize,
    pub alpha: f64,
    pub segments: Option<usize>,
    pub dtw_window: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectResponse {
    pub served_from_cache: bool,
    pub result: SelectionResult,
}

fn selection_error(e: SelectionError) -> ApiError {
    match e {
        SelectionError::KOutOfRange { .. } => ApiError::bad_request("KOutOfRange", e.to_string()),
        SelectionError::AlphaOutOfRange(_) => {
            ApiError::bad_request("AlphaOutOfRange", e.to_string())
        }
        other => ApiError::internal(other.to_string()),
    }
}

async fn select(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SelectRequest>,
) -> ApiResult<SelectResponse> {
    let ds = find_dataset(&state, &id)?;
    let params = SelectionParams::new(req.k, req.alpha)
        .with_segments(req.segments.unwrap_or(DEFAULT_SEGMENTS))
        .with_window(req.dtw_window);
    params.validate(ds.len()).map_err(|e| {
        let kind = match e {
            repsel_core::model::ParamsError::KOutOfRange { .. } => "KOutOfRange",
            repsel_core::model::ParamsError::AlphaOutOfRange(_) => "AlphaOutOfRange",
            repsel_core::model::ParamsError::ZeroSegments => "ZeroSegments",
        };
        ApiError::bad_request(kind, e.to_string())
    })?;

    let mparams = MatrixParams::for_selection(&ds, &params);
    let lookup = state
        .lookup_matrix(&ds.id, &mparams)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let (matrix, served_from_cache) = match lookup {
        MatrixLookup::Ready(m) => (m, true),
        MatrixLookup::Building(job_id) => return Err(ApiError::building(job_id)),
        MatrixLookup::Missing => match state.build_now(ds.clone(), params).await {
            Err(job_id) => return Err(ApiError::building(job_id)),
            Ok(Err(e)) => {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "MatrixBuildFailed",
                    e,
                ))
            }
            Ok(Ok(m)) => (m, false),
        },
    };
    let result = greedy_select(&matrix, &params).map_err(selection_error)?;
    Ok(Json(SelectResponse {
        served_from_cache,
        result,
    }))
}

#[derive(Debug, Deserialize)]
struct MatrixQuery {
    segments: Option<usize>,
    window: Option<usize>,
}

async fn matrix(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<MatrixQuery>,
) -> ApiResult<DistanceMatrix> {
    let ds = find_dataset(&state, &id)?;
    let mparams = MatrixParams {
        segments: q.segments.unwrap_or(DEFAULT_SEGMENTS),
        dtw_window: q.window,
        normalize: ds.normalized(),
    };
    match state
        .lookup_matrix(&ds.id, &mparams)
        .map_err(|e| ApiError::internal(e.to_string()))?
    {
        MatrixLookup::Ready(m) => Ok(Json((*m).clone())),
        MatrixLookup::Building(job_id) => Err(ApiError::building(job_id)),
        MatrixLookup::Missing => Err(ApiError::not_found(format!(
            "no matrix for {} with {}",
            ds.id,
            mparams.fingerprint()
        ))),
    }
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<JobStatus> {
    state
        .job(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown job {id}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub dtw_evaluations: u64,
    pub datasets: usize,
}

async fn metrics(State(state): State<AppState>) -> ApiResult<Metrics> {
    Ok(Json(Metrics {
        dtw_evaluations: dtw_evaluations(),
        datasets: state.datasets().len(),
    }))
}
