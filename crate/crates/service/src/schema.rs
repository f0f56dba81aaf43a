//! Versioned JSON schemas of every request and response body.

use std::sync::OnceLock;

use axum::extract::Path;
use axum::Json;
use serde_json::{json, Map, Value};

use crate::error::ApiError;

pub const VERSION: &str = "v1";
const DOCUMENT: &str = include_str!("../schema/v1.json");

fn document() -> &'static Value {
    static DOC: OnceLock<Value> = OnceLock::new();
    DOC.get_or_init(|| serde_json::from_str(DOCUMENT).expect("embedded schema is valid JSON"))
}

/// Names of the body schemas.
pub fn names() -> Vec<&'static str> {
    document()["schemas"].as_object().map(|m| m.keys().map(String::as_str).collect()).unwrap_or_default()
}

/// A self-contained schema for one body type.
pub fn schema(name: &str) -> Option<Value> {
    let doc = document();
    let body = doc["schemas"].get(name)?.as_object()?;
    let mut out = Map::new();
    out.insert("$schema".into(), doc["$schema"].clone());
    out.insert("$id".into(), json!(format!("/schema/{VERSION}/{name}")));
    out.insert("$defs".into(), doc["$defs"].clone());
    out.extend(body.clone());
    Some(Value::Object(out))
}

pub(crate) async fn index() -> Json<Value> {
    Json(document().clone())
}

pub(crate) async fn one(Path(name): Path<String>) -> Result<Json<Value>, ApiError> {
    schema(&name).map(Json).ok_or_else(|| ApiError::NotFound(format!("schema {name}")))
}
