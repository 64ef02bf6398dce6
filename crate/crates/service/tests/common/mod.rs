#![allow(dead_code)]

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use repsel_service::{router, AppState, ServiceConfig};
use serde_json::Value;
use tower::ServiceExt;

pub const BOUNDARY: &str = "repsel-test-boundary";

pub struct TestApp {
    pub app: Router,
    pub state: AppState,
    pub dir: tempfile::TempDir,
}

pub fn app_with(config: impl FnOnce(&mut ServiceConfig)) -> TestApp {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::new(dir.path().join("data"), dir.path().join("cache"));
    config(&mut cfg);
    let state = AppState::open(cfg).unwrap();
    TestApp {
        app: router(state.clone()),
        state,
        dir,
    }
}

pub fn app() -> TestApp {
    app_with(|_| {})
}

pub fn multipart_body(csv: &[u8], config: Option<&str>) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(
        format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"data.csv\"\r\nContent-Type: text/csv\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(csv);
    body.extend_from_slice(b"\r\n");
    if let Some(cfg) = config {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"config\"\r\nContent-Type: application/json\r\n\r\n{cfg}\r\n"
            )
            .as_bytes(),
        );
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    (status, bytes.to_vec())
}

pub async fn upload(app: &Router, csv: &[u8], config: Option<&str>) -> (StatusCode, Value) {
    let req = Request::post("/datasets")
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(multipart_body(csv, config)))
        .unwrap();
    let (status, bytes) = send(app, req).await;
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

pub async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

pub async fn post_select(app: &Router, id: &str, body: Value) -> (StatusCode, Vec<u8>) {
    let req = Request::post(format!("/datasets/{id}/select"))
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

/// Polls a job until it is done or failed, returning the progress trace.
pub async fn wait_job(app: &Router, job_id: &str) -> (Value, Vec<f64>) {
    let mut trace = Vec::new();
    for _ in 0..6000 {
        let (status, job) = get_json(app, &format!("/jobs/{job_id}")).await;
        assert_eq!(status, StatusCode::OK);
        trace.push(job["progress"].as_f64().unwrap());
        if job["phase"] == "done" || job["phase"] == "failed" {
            return (job, trace);
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {job_id} did not finish");
}

/// `n` noisy sine-family series of `len` points with a `t` column.
pub fn wide_csv(n: usize, len: usize) -> String {
    let mut out = String::from("t");
    for s in 0..n {
        out.push_str(&format!(",s{s}"));
    }
    out.push('\n');
    for t in 0..len {
        out.push_str(&t.to_string());
        for s in 0..n {
            let x = t as f64 / len as f64;
            let family = (s % 4) as f64;
            let v = ((family + 1.0) * 6.0 * x + s as f64 * 0.1).sin()
                + 0.2 * family * x
                + (((t * 31 + s * 17) % 13) as f64 - 6.0) * 0.01;
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub const TIMED: &str = r#"{"time_column":"t"}"#;
