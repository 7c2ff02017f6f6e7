#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use heatdiff_core::io::dataset::{load_dataset, Dataset};
use heatdiff_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn dataset() -> Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")).unwrap())
        .clone()
}

pub fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(vec![dataset()], config).unwrap())
}

pub fn app() -> Router {
    app_with(ServiceConfig::default())
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => request.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    Reply { status, content_type, body: String::from_utf8(bytes.to_vec()).unwrap() }
}

pub async fn session(app: &Router, query: &str) -> String {
    let r = call(app, Method::POST, &format!("/sessions{query}"), Some(serde_json::json!({"dataset": "synthetic"}))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
    r.json()["id"].as_str().unwrap().to_string()
}

pub async fn start(app: &Router, session: &str, body: Value) -> String {
    let r = call(app, Method::POST, &format!("/sessions/{session}/runs"), Some(body)).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.body);
    r.json()["run_id"].as_str().unwrap().to_string()
}

pub async fn wait(app: &Router, run: &str) -> Value {
    for _ in 0..6000 {
        let status = call(app, Method::GET, &format!("/runs/{run}/status"), None).await.json();
        if status["state"] != "running" {
            return status;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {run} did not finish");
}
