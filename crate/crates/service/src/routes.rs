//! Route handlers.

use std::path::{Component, Path as FsPath};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};

use hemocomm_api::{
    DecodeRequest, DecodeResponse, ErrorBody, ExperimentSpec, FileList, HealthResponse, JobInfo,
    SubmitResponse, ValidateRequest, ValidateResponse,
};
use hemocomm_core::chain::decode_frames;
use hemocomm_core::experiment::total_steps;
use hemocomm_core::output::run_and_emit;

use crate::AppState;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/experiments", post(submit))
        .route("/api/v1/jobs", get(list_jobs))
        .route("/api/v1/jobs/:id", get(job_info))
        .route("/api/v1/jobs/:id/files", get(job_files))
        .route("/api/v1/jobs/:id/files/*name", get(job_file))
        .route("/api/v1/chain/decode", post(decode))
        .route("/api/v1/config/validate", post(validate))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse { status: "ok".into(), version: hemocomm_core::VERSION.into() })
}

async fn submit(State(state): State<Arc<AppState>>, Json(spec): Json<ExperimentSpec>) -> Response {
    if let Err(e) = spec.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    let (id, progress, dir) =
        state.jobs.create(spec.kind.to_string(), total_steps(&spec), &state.output_root);
    let registry = Arc::clone(&state);
    registry.jobs.set_running(id);
    tokio::task::spawn_blocking(move || {
        let result = run_and_emit(&spec, &dir, Some(&progress)).map_err(|e| e.to_string());
        registry.jobs.finish(id, result);
    });
    (StatusCode::ACCEPTED, Json(SubmitResponse { job_id: id })).into_response()
}

async fn list_jobs(State(state): State<Arc<AppState>>) -> Json<Vec<JobInfo>> {
    Json(state.jobs.list())
}

async fn job_info(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match state.jobs.info(id) {
        Some(info) => Json(info).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no job {id}")),
    }
}

async fn job_files(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match state.jobs.files(id) {
        Some(files) => Json(FileList { files }).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no job {id}")),
    }
}

async fn job_file(
    State(state): State<Arc<AppState>>,
    Path((id, name)): Path<(u64, String)>,
) -> Response {
    let Some(dir) = state.jobs.dir(id) else {
        return error(StatusCode::NOT_FOUND, format!("no job {id}"));
    };
    // Output names are relative paths like rep000/events.csv; refuse
    // anything that escapes the job directory.
    let rel = FsPath::new(&name);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return error(StatusCode::BAD_REQUEST, "invalid file name");
    }
    match tokio::fs::read(dir.join(rel)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, format!("{name}: {e}")),
    }
}

async fn decode(Json(req): Json<DecodeRequest>) -> Response {
    let mut events = req.events_us.clone();
    events.sort_by(f64::total_cmp);
    match decode_frames(&events, &req.chain, req.horizon_us) {
        Ok(out) => Json(DecodeResponse {
            decoded_pulses: out.decoded_pulses(),
            frames: out.frames,
            final_mode: out.final_mode,
            sync_count: out.sync_count,
            emitted_one_bits: out.emitted_one_bits,
        })
        .into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

async fn validate(Json(req): Json<ValidateRequest>) -> Json<ValidateResponse> {
    match hemocomm_core::config::load_config(&req.config) {
        Ok(config) => Json(ValidateResponse { ok: true, error: None, config: Some(config) }),
        Err(e) => Json(ValidateResponse { ok: false, error: Some(e.to_string()), config: None }),
    }
}
