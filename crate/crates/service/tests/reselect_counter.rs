//! Kept in its own binary: the DTW counter is process-wide.

mod common;

use common::*;
use serde_json::{json, Value};

#[tokio::test]
async fn reselect_after_warm_up_runs_no_dtw() {
    let t = app();
    let (_, up) = upload(&t.app, wide_csv(12, 800).as_bytes(), Some(TIMED)).await;
    let id = up["dataset_id"].as_str().unwrap().to_string();
    wait_job(&t.app, up["job_id"].as_str().unwrap()).await;

    let (_, before) = get_json(&t.app, "/metrics").await;
    let before = before["dtw_evaluations"].as_u64().unwrap();
    assert!(before >= 66, "the default build ran 12*11/2 evaluations");
    for (k, alpha) in [(1, 0.0), (3, 0.5), (12, 1.0), (5, 0.25), (2, 0.75)] {
        let (_, body) = post_select(&t.app, &id, json!({"k": k, "alpha": alpha})).await;
        let body: Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(body["served_from_cache"], true);
    }
    let (_, after) = get_json(&t.app, "/metrics").await;
    assert_eq!(after["dtw_evaluations"].as_u64().unwrap(), before);
}
