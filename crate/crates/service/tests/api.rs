use std::sync::Arc;

use attrib_service::extractor::{Extractor, OneHotExtractor};
use attrib_service::{router, AppState};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const DOC: &str = "Lincoln Castle was built in 1068 by William.\n\nThe cathedral is nearby and very tall.";
const ANSWER: &str = "The castle was built in 1068 by William.";

fn state(root: &std::path::Path) -> Arc<AppState> {
    let ex: Arc<dyn Extractor> = Arc::new(OneHotExtractor::default());
    Arc::new(AppState::open(root, Some(ex)).unwrap())
}

async fn call(app: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn create(app: &Arc<AppState>, answer: Option<&str>) -> String {
    let body = match answer {
        Some(a) => json!({"document": DOC, "question": "When was it built?", "answer": a}),
        None => json!({"document": DOC, "question": "When was it built?", "generate": true}),
    };
    let (status, v) = call(app, "POST", "/api/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["status"], "ready");
    assert_eq!(v["model_name"], "one-hot");
    assert_eq!(v["schema_version"], 1);
    v["session_id"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn detect_threshold_extremes() {
    let dir = tempfile::tempdir().unwrap();
    let app = state(dir.path());
    let id = create(&app, Some(ANSWER)).await;
    let uri = format!("/api/sessions/{id}/detect");

    let (s, v) = call(&app, "POST", &uri, Some(json!({"layer": 0, "theta": -1.0}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let tokens = v["tokens"].as_array().unwrap();
    assert!(tokens.iter().all(|t| t["copied"] == true));
    let spans = v["spans"].as_array().unwrap();
    assert_eq!(spans.len(), 1);
    assert_eq!(spans[0]["answer_char_start"], 0);
    assert_eq!(spans[0]["answer_char_end"], ANSWER.len());
    assert_eq!(spans[0]["text"], ANSWER);

    let (_, v) = call(&app, "POST", &uri, Some(json!({"layer": 0, "theta": 1.0}))).await;
    assert!(v["spans"].as_array().unwrap().is_empty());

    let (s, _) = call(&app, "POST", &uri, Some(json!({"layer": 9, "theta": 0.5}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn attribute_is_deterministic_and_maps_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let app = state(dir.path());
    let id = create(&app, Some(ANSWER)).await;
    let uri = format!("/api/sessions/{id}/attribute");
    let start = ANSWER.find("built").unwrap();
    let end = ANSWER.find(" by").unwrap();
    let body = json!({"answer_char_start": start, "answer_char_end": end, "layer": 1});
    let (s, a) = call(&app, "POST", &uri, Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK, "{a}");
    let (_, b) = call(&app, "POST", &uri, Some(body)).await;
    assert_eq!(a, b);

    let w = &a["window"];
    let (ws, we) = (w["document_char_start"].as_u64().unwrap() as usize, w["document_char_end"].as_u64().unwrap() as usize);
    assert_eq!(&DOC[ws..we], "built in 1068");
    assert_eq!(w["text"], "built in 1068");
    assert_eq!(a["predicted_evidence"], 0);
    assert_eq!(a["evidence"].as_array().unwrap().len(), 2);
    assert_eq!(a["span"]["answer_char_start"], start);
}

#[tokio::test]
async fn validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = state(dir.path());
    let id = create(&app, Some(ANSWER)).await;
    let uri = format!("/api/sessions/{id}/attribute");
    let ws = ANSWER.find(' ').unwrap();
    let (s, v) = call(&app, "POST", &uri, Some(json!({"answer_char_start": ws, "answer_char_end": ws + 1, "layer": 0}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("zero answer tokens"));

    let (s, _) = call(&app, "POST", &uri, Some(json!({"answer_char_start": 3, "answer_char_end": 999, "layer": 0}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, _) = call(&app, "POST", "/api/sessions", Some(json!({"document": "  \n", "answer": "x"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/api/sessions", Some(json!({"document": DOC, "answer": "x", "generate": true}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/api/sessions", Some(json!({"document": DOC}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, v) = call(&app, "GET", "/api/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["schema_version"], 1);
}

#[tokio::test]
async fn generate_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = state(dir.path());
        let id = create(&app, None).await;
        let (_, v) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
        assert_eq!(v["answer"], "Lincoln Castle was built in 1068 by William.");
        id
    };
    let app = state(dir.path());
    let (s, v) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ready");
    assert_eq!(v["layer_count"], 2);
    let (s, h) = call(&app, "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["sessions"], 1);
    assert_eq!(h["extractor"], "one-hot");
}

#[tokio::test]
async fn missing_extractor_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let app = Arc::new(AppState::open(dir.path(), None).unwrap());
    let (s, _) = call(&app, "POST", "/api/sessions", Some(json!({"document": DOC, "answer": "x"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);

    let app = state(dir.path());
    let (s, v) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"document": DOC, "answer": "x", "template_id": "nope"})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
}
