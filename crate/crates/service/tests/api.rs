use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use fairfront::synth::{generate, to_csv, SynthSpec};
use fairfront_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const CASE_STUDY: &str = r#"{
  "dm_utility": {"lending": {"interest_rate": 0.1}},
  "ds_utility": {"base": {"u11": 10, "u10": -5, "u01": -1, "u00": 0}},
  "claims": {"outcome_equals": 1},
  "positions": "sex",
  "pattern": "maximin",
  "viability_floor": 0
}"#;

const UPLOAD: &str = "/sessions?group=sex&id=id&amount=amount";

fn app() -> Router {
    router(AppState::new(ServiceConfig::default()).unwrap())
}

fn csv(size: usize, seed: u64) -> String {
    let mut s = SynthSpec::two_groups(size, seed);
    s.amounts = true;
    to_csv(&generate(&s), "sex")
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<String>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.into()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: impl Into<String>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| panic!("non-JSON body: {}", String::from_utf8_lossy(&bytes)))
    };
    (status, v)
}

async fn create(app: &Router, size: usize, seed: u64) -> String {
    let (status, v) = call_json(app, "POST", UPLOAD, csv(size, seed)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn configure(app: &Router, id: &str, config: &str) -> Value {
    let (status, v) = call_json(app, "PUT", &format!("/sessions/{id}/config"), config).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

async fn wait_ready(app: &Router, id: &str) -> Value {
    for _ in 0..2_000 {
        let (_, v) = call_json(app, "GET", &format!("/sessions/{id}/status"), "").await;
        match v["status"].as_str().unwrap() {
            "sweeping" => tokio::time::sleep(Duration::from_millis(5)).await,
            _ => return v,
        }
    }
    panic!("sweep did not finish");
}

async fn sweep(app: &Router, id: &str) -> Value {
    let (status, v) = call_json(app, "POST", &format!("/sessions/{id}/sweep"), "").await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let v = wait_ready(app, id).await;
    assert_eq!(v["status"], "ready", "{v}");
    v
}

fn assert_error(v: &Value, code: &str) {
    assert_eq!(v["code"], code, "{v}");
    assert!(v["message"].is_string());
    assert!(v.get("detail").is_some());
}

#[tokio::test(flavor = "multi_thread")]
async fn upload_errors() {
    let app = app();
    let (status, v) = call_json(&app, "POST", "/sessions", "score,group,outcome\n0.5,F,1\n2.0,M,1\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&v, "BadScore");
    assert_eq!(v["detail"]["row"], 2);

    let (status, v) = call_json(&app, "POST", "/sessions?group=sex", "score,group,outcome\n0.5,F,1\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&v, "MissingColumn");

    let small = router(
        AppState::new(ServiceConfig {
            max_upload_bytes: 1_000,
            ..Default::default()
        })
        .unwrap(),
    );
    let (status, v) = call_json(&small, "POST", UPLOAD, csv(200, 1)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_error(&v, "PayloadTooLarge");
}

#[tokio::test(flavor = "multi_thread")]
async fn config_errors() {
    let app = app();
    let (status, v) = call_json(&app, "PUT", "/sessions/nope/config", CASE_STUDY).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&v, "UnknownSession");

    let id = create(&app, 100, 2).await;
    let uri = format!("/sessions/{id}/config");
    let three_weights = CASE_STUDY.replace(r#""maximin""#, r#"{"prioritarian": {"weights": [3, 2, 1]}}"#);
    let (status, v) = call_json(&app, "PUT", &uri, three_weights).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&v, "WeightLengthMismatch");

    let (status, v) = call_json(&app, "PUT", &uri, CASE_STUDY.replace("u00", "u22")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&v, "SchemaViolation");
    assert_eq!(v["detail"]["path"], "/ds_utility/base/u22");

    let (status, v) = call_json(&app, "PUT", &uri, CASE_STUDY.replace(r#""sex""#, r#""gender""#)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["detail"]["path"], "/positions");

    let (status, v) = call_json(&app, "POST", &format!("/sessions/{id}/sweep"), "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&v, "NoConfig");
}

#[tokio::test(flavor = "multi_thread")]
async fn empty_position_is_rejected_before_starting() {
    let app = app();
    let body = "id,score,sex,outcome,amount\n1,0.9,female,1,1\n2,0.4,male,0,1\n";
    let (_, v) = call_json(&app, "POST", UPLOAD, body).await;
    let id = v["id"].as_str().unwrap().to_string();
    configure(&app, &id, CASE_STUDY).await;
    let (status, v) = call_json(&app, "POST", &format!("/sessions/{id}/sweep"), "").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&v, "EmptyPosition");
    assert_eq!(v["detail"]["position"], "male");
    let (_, v) = call_json(&app, "GET", &format!("/sessions/{id}/status"), "").await;
    assert_eq!(v["status"], "idle");
}

#[tokio::test(flavor = "multi_thread")]
async fn sweep_front_and_staleness() {
    let app = app();
    let id = create(&app, 1_000, 42).await;
    let put = configure(&app, &id, CASE_STUDY).await;
    assert_eq!(put["stale"], false);
    let status = sweep(&app, &id).await;
    assert_eq!(status["size"], 10_201);
    assert_eq!(status["progress"], 1.0);
    assert_eq!(status["result_digest"], put["config_digest"]);

    let (code, doc) = call_json(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    assert_eq!(code, StatusCode::OK);
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 10_201);
    let front = points.iter().filter(|p| p["on_front"] == true).count();
    assert_eq!(doc["front_size"], front);
    assert_eq!(status["front_size"], front);
    assert!(points.iter().any(|p| p["dm_utility"].as_f64().unwrap() < 0.0));

    let (_, viable) = call_json(&app, "GET", &format!("/sessions/{id}/pareto?viable_only=true"), "").await;
    let viable = viable["points"].as_array().unwrap().clone();
    assert!(!viable.is_empty() && viable.len() < 10_201);
    assert!(viable.iter().all(|p| p["dm_utility"].as_f64().unwrap() >= 0.0));
    assert_eq!(
        viable.len(),
        points.iter().filter(|p| p["dm_utility"].as_f64().unwrap() >= 0.0).count()
    );

    let (_, front_doc) = call_json(&app, "GET", &format!("/sessions/{id}/pareto?front_only=true"), "").await;
    assert_eq!(front_doc["points"].as_array().unwrap().len(), front);

    // switch pattern: result kept, but stale
    let put = configure(&app, &id, &CASE_STUDY.replace("maximin", "egalitarian")).await;
    assert_eq!(put["stale"], true);
    let (code, v) = call_json(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    assert_eq!(code, StatusCode::CONFLICT);
    assert_error(&v, "StaleResult");
    assert_eq!(v["detail"]["result_digest"], status["result_digest"]);
    assert_eq!(v["detail"]["config_digest"], put["config_digest"]);
    let status = sweep(&app, &id).await;
    assert_eq!(status["stale"], false);
}

#[tokio::test(flavor = "multi_thread")]
async fn progress_is_monotone_and_runs_are_single_flight() {
    let app = app();
    let id = create(&app, 6_000, 3).await;
    configure(&app, &id, CASE_STUDY).await;
    let (status, _) = call_json(&app, "POST", &format!("/sessions/{id}/sweep"), "").await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, v) = call_json(&app, "POST", &format!("/sessions/{id}/sweep"), "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&v, "SweepInProgress");
    let (status, _) = call_json(&app, "PUT", &format!("/sessions/{id}/config"), CASE_STUDY).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let mut seen = Vec::new();
    loop {
        let (_, v) = call_json(&app, "GET", &format!("/sessions/{id}/status"), "").await;
        seen.push(v["progress"].as_f64().unwrap());
        if v["status"] != "sweeping" {
            assert_eq!(v["status"], "ready");
            break;
        }
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    assert!(seen.windows(2).all(|w| w[0] <= w[1]), "{seen:?}");
    assert_eq!(*seen.last().unwrap(), 1.0);
}

#[tokio::test(flavor = "multi_thread")]
async fn rule_details() {
    let app = app();
    let id = create(&app, 800, 9).await;
    // the default grid plus the break-even score
    let mut grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    grid.push(1.0 / 1.1);
    grid.sort_by(f64::total_cmp);
    let config = CASE_STUDY.replace(
        r#""viability_floor": 0"#,
        &format!(r#""viability_floor": 0, "grid": {{"explicit": {{"female": {0}, "male": {0}}}}}"#, json!(grid)),
    );
    configure(&app, &id, &config).await;
    sweep(&app, &id).await;
    let (_, doc) = call_json(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 102 * 102);

    let min_of = |p: &Value| {
        p["position_utilities"]
            .as_object()
            .unwrap()
            .values()
            .map(|v| v.as_f64().unwrap())
            .fold(f64::INFINITY, f64::min)
    };
    let best = doc["extremes"]["max_fairness"].as_u64().unwrap();
    let (code, detail) = call_json(&app, "GET", &format!("/sessions/{id}/rules/{best}"), "").await;
    assert_eq!(code, StatusCode::OK);
    let sweep_max = points.iter().map(min_of).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(min_of(&detail), sweep_max);
    assert_eq!(detail["index"], best);
    assert!(detail["claim_holders"]["female"].as_u64().unwrap() > 0);
    assert!(detail["acceptance_rates"]["male"].is_number());

    let (code, at_p) = call_json(&app, "GET", &format!("/sessions/{id}/rules/u:0.909090909091"), "").await;
    assert_eq!(code, StatusCode::OK, "{at_p}");
    let dm = at_p["dm_utility"].as_f64().unwrap();
    for p in points {
        let t = p["thresholds"].as_object().unwrap();
        if t["female"] == t["male"] {
            assert!(p["dm_utility"].as_f64().unwrap() <= dm);
        }
    }

    let (code, v) = call_json(&app, "GET", &format!("/sessions/{id}/rules/u:0.123456"), "").await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    assert_error(&v, "UnknownRule");
    let (code, _) = call_json(&app, "GET", &format!("/sessions/{id}/rules/99999999"), "").await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let (code, v) = call_json(&app, "GET", &format!("/sessions/{id}/rules/g:female=0.5,male=0.6"), "").await;
    assert_eq!(code, StatusCode::OK, "{v}");
    assert_eq!(v["thresholds"], json!({"female": 0.5, "male": 0.6}));
}

#[tokio::test(flavor = "multi_thread")]
async fn selection_returns_decision_record() {
    let app = app();
    let id = create(&app, 300, 4).await;
    let put = configure(&app, &id, CASE_STUDY).await;
    let (_, created) = call_json(&app, "GET", &format!("/sessions/{id}/status"), "").await;
    let uri = format!("/sessions/{id}/selection");
    let (code, _) = call_json(&app, "POST", &uri, r#"{"index": 0}"#).await;
    assert_eq!(code, StatusCode::CONFLICT);
    sweep(&app, &id).await;

    let (code, v) = call_json(&app, "POST", &uri, r#"{"index": 0, "rule": "u:0.5"}"#).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    assert_error(&v, "BadBody");

    let (code, record) = call_json(&app, "POST", &uri, r#"{"rule": "g:female=0.8,male=0.85"}"#).await;
    assert_eq!(code, StatusCode::OK, "{record}");
    assert_eq!(record["config_digest"], put["config_digest"]);
    assert_eq!(record["dataset"]["digest"], created["dataset_digest"]);
    assert_eq!(record["config"]["pattern"], "maximin");
    assert_eq!(record["record"]["thresholds"], json!({"female": 0.8, "male": 0.85}));
    assert!(record["record"]["fairness_score"].is_number());
    let (_, status) = call_json(&app, "GET", &format!("/sessions/{id}/status"), "").await;
    assert_eq!(status["has_selection"], true);
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated() {
    let app = app();
    let a = create(&app, 400, 5).await;
    let b = create(&app, 400, 6).await;
    configure(&app, &b, CASE_STUDY).await;
    sweep(&app, &b).await;
    let (_, b_status) = call(&app, "GET", &format!("/sessions/{b}/status"), "").await;
    let (_, b_pareto) = call(&app, "GET", &format!("/sessions/{b}/pareto"), "").await;

    configure(&app, &a, &CASE_STUDY.replace("maximin", "egalitarian")).await;
    let (code, _) = call(&app, "POST", &format!("/sessions/{a}/sweep"), "").await;
    assert_eq!(code, StatusCode::ACCEPTED);
    // interleave reads of b while a sweeps
    let (_, mid) = call(&app, "GET", &format!("/sessions/{b}/pareto"), "").await;
    assert_eq!(mid, b_pareto);
    wait_ready(&app, &a).await;
    call(&app, "POST", &format!("/sessions/{a}/selection"), r#"{"index": 3}"#).await;

    let (_, after_status) = call(&app, "GET", &format!("/sessions/{b}/status"), "").await;
    let (_, after_pareto) = call(&app, "GET", &format!("/sessions/{b}/pareto"), "").await;
    assert_eq!(after_status, b_status);
    assert_eq!(after_pareto, b_pareto);
}

#[tokio::test(flavor = "multi_thread")]
async fn rerun_with_same_config_is_identical() {
    let app = app();
    let id = create(&app, 500, 7).await;
    configure(&app, &id, CASE_STUDY).await;
    sweep(&app, &id).await;
    let (_, first) = call(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    configure(&app, &id, CASE_STUDY).await;
    sweep(&app, &id).await;
    let (_, second) = call(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    assert_eq!(first, second);

    // a second session with the same upload and config yields the same payload
    let other = create(&app, 500, 7).await;
    configure(&app, &other, CASE_STUDY).await;
    sweep(&app, &other).await;
    let (_, third) = call(&app, "GET", &format!("/sessions/{other}/pareto"), "").await;
    assert_eq!(first, third);
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let app = router(AppState::new(cfg.clone()).unwrap());
    let id = create(&app, 300, 8).await;
    configure(&app, &id, CASE_STUDY).await;
    sweep(&app, &id).await;
    call(&app, "POST", &format!("/sessions/{id}/selection"), r#"{"index": 7}"#).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    drop(app);

    let state = AppState::new(cfg).unwrap();
    assert_eq!(state.session_count(), 1);
    let app = router(state);
    let (_, status) = call_json(&app, "GET", &format!("/sessions/{id}/status"), "").await;
    assert_eq!(status["status"], "ready");
    assert_eq!(status["has_selection"], true);
    let (code, after) = call(&app, "GET", &format!("/sessions/{id}/pareto"), "").await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(before, after);
}

#[tokio::test(flavor = "multi_thread")]
async fn cors_and_unknown_session() {
    let app = app();
    let req = Request::builder()
        .method("GET")
        .uri("/sessions/missing/status")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
    assert_eq!(res.headers()["access-control-allow-origin"], "*");
    let (code, v) = call_json(&app, "GET", "/sessions/missing/pareto", "").await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    assert_error(&v, "UnknownSession");
}
