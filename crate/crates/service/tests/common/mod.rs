#![allow(dead_code)]

use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

/// Polls the session until no background work is pending.
pub async fn wait_idle(app: &Router, id: &str) -> Value {
    let start = Instant::now();
    loop {
        let (status, state) = get(app, &format!("/sessions/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        let phase = state["phase"].as_str().unwrap().to_string();
        let busy = (phase == "optimizing" && state["error"].is_null()) || (phase == "evaluating" && state["mode"] == "builtin");
        if !busy {
            return state;
        }
        assert!(start.elapsed() < Duration::from_secs(300), "session stuck in {phase}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// Small budgets so a proposal takes well under a second.
pub fn quick_settings() -> Value {
    json!({
        "theta_samples": 32,
        "gp": {"ensemble_size": 2, "restarts": 4},
        "sga": {"restarts": 2, "steps": 10, "rank_samples": 128},
        "thompson": {"probes": 64}
    })
}

pub fn dtlz1a_request(evaluations: usize) -> Value {
    json!({
        "config": {
            "problem": "dtlz1a",
            "policy": "EI-UU",
            "evaluations": evaluations,
            "seeds": {"evaluation": 1, "dm": 2, "policy": 3},
            "settings": quick_settings()
        },
        "labels": ["f1", "f2"]
    })
}

/// A manual session over a one-dimensional box with two attributes and a
/// linear utility `θ y₁ + (1 − θ) y₂`, `θ ~ U[0, 1]`.
pub fn manual_request(evaluations: usize) -> Value {
    json!({
        "config": {
            "design_box": {"lower": [0.0], "upper": [1.0]},
            "attributes": 2,
            "family": "linear",
            "prior": {"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
            "policy": "EI-UU",
            "evaluations": evaluations,
            "init_count": 2,
            "settings": quick_settings()
        }
    })
}

pub struct Schemas(Vec<(String, jsonschema::Validator)>);

impl Schemas {
    pub async fn fetch(app: &Router) -> Self {
        let (status, index) = get(app, "/schema").await;
        assert_eq!(status, StatusCode::OK);
        let mut out = Vec::new();
        for name in index["schemas"].as_object().unwrap().keys() {
            let (status, schema) = get(app, &format!("/schema/{name}")).await;
            assert_eq!(status, StatusCode::OK);
            let v = jsonschema::validator_for(&schema).unwrap_or_else(|e| panic!("{name}: {e}"));
            out.push((name.clone(), v));
        }
        Schemas(out)
    }

    pub fn check(&self, name: &str, value: &Value) {
        let v = &self.0.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no schema {name}")).1;
        let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}\n{value}");
    }
}
