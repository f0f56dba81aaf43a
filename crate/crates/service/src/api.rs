use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use prefbo::preference::{PosteriorSummary, Response};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use crate::error::ApiError;
use crate::event::LoggedEvent;
use crate::schema;
use crate::session::{CreateSession, Session};
use crate::state::{Phase, SessionState};
use crate::store::Store;

type Handle = Arc<Mutex<Session>>;

/// Shared server state: every session, each behind its own lock so
/// mutations of one session are serialized and sessions run in parallel.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Handle>>>,
    store: Store,
}

impl AppState {
    /// Opens `data_dir` and restores every session logged there. Sessions
    /// whose next design was being computed are resumed.
    pub fn open(data_dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let store = Store::open(data_dir)?;
        let mut sessions = HashMap::new();
        for (id, log) in store.load_all()? {
            let restored = log
                .map_err(ApiError::from)
                .and_then(|log| Session::restore(log, store.clone()));
            match restored {
                Ok(s) => {
                    sessions.insert(id, Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::error!("skipping session {id}: {e}"),
            }
        }
        tracing::info!("restored {} sessions from {}", sessions.len(), store.dir().display());
        Ok(AppState {
            sessions: Arc::new(RwLock::new(sessions)),
            store,
        })
    }

    /// Starts background work for every restored session that needs it.
    /// Must run inside a Tokio runtime.
    pub async fn resume(&self) {
        for handle in self.sessions.read().await.values() {
            spawn_optimization(handle.clone());
        }
    }

    async fn session(&self, id: &str) -> Result<Handle, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    /// Snapshot of a session's public state.
    pub async fn snapshot(&self, id: &str) -> Result<SessionState, ApiError> {
        Ok(self.session(id).await?.lock().await.state().clone())
    }
}

/// Computes the next design off the request path, then records it.
fn spawn_optimization(handle: Handle) {
    tokio::spawn(async move {
        let Some(mut exp) = handle.lock().await.begin_optimization() else {
            return;
        };
        let joined = tokio::task::spawn_blocking(move || {
            let proposal = exp.propose();
            (exp, proposal)
        })
        .await;
        let mut session = handle.lock().await;
        let (exp, proposal) = match joined {
            Ok(done) => done,
            Err(e) => {
                let exp = session.experiment().clone();
                (exp, Err(prefbo::Error::Numerical(format!("acquisition task failed: {e}"))))
            }
        };
        if let Err(e) = session.finish_optimization(exp, proposal) {
            tracing::error!("session {}: {e}", session.state().id);
        }
    });
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_state))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/response", post(post_response))
        .route("/sessions/{id}/evaluation", post(post_evaluation))
        .route("/sessions/{id}/retry", post(post_retry))
        .route("/sessions/{id}/menu", get(get_menu))
        .route("/sessions/{id}/events", get(get_events))
        .route("/schema", get(schema::index))
        .route("/schema/{name}", get(schema::one))
        .with_state(app)
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request = CreateSession::parse(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let store = app.store.clone();
    let session = {
        let id = id.clone();
        tokio::task::spawn_blocking(move || Session::create(id, request, store))
            .await
            .map_err(|e| prefbo::Error::Numerical(e.to_string()))??
    };
    let state = session.state().clone();
    app.sessions.write().await.insert(id, Arc::new(Mutex::new(session)));
    tracing::info!("created session {} ({} evaluations)", state.id, state.evaluations.len());
    Ok((StatusCode::CREATED, Json(state)))
}

#[derive(Serialize)]
struct SessionSummary {
    id: String,
    phase: Phase,
    evaluated: usize,
    seq: u64,
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<SessionSummary>> {
    let handles: Vec<Handle> = app.sessions.read().await.values().cloned().collect();
    let mut out = Vec::with_capacity(handles.len());
    for h in handles {
        let s = h.lock().await;
        let st = s.state();
        out.push(SessionSummary {
            id: st.id.clone(),
            phase: st.phase,
            evaluated: st.evaluations.len(),
            seq: st.seq,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    Ok(Json(app.snapshot(&id).await?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    /// Position in the evaluation list.
    pub index: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// The pair shown to the DM: is `first` preferred to `second`?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub m: usize,
    pub first: QueryItem,
    pub second: QueryItem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

async fn get_query(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<QueryView>, ApiError> {
    let st = app.snapshot(&id).await?;
    let q = match (&st.pending_query, st.phase) {
        (Some(q), Phase::AwaitingPreference) => q,
        _ => return Err(ApiError::phase(st.phase, "no query is pending")),
    };
    let item = |i: usize| QueryItem {
        index: i,
        n: st.evaluations[i].n,
        x: st.evaluations[i].x.clone(),
        y: st.evaluations[i].y.clone(),
    };
    Ok(Json(QueryView {
        m: q.m,
        first: item(q.pair.0),
        second: item(q.pair.1),
        labels: st.labels.clone(),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseBody {
    /// `1` prefers the first design, `-1` the second, `0` is indifference.
    response: i64,
    #[serde(default)]
    m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub m: usize,
    pub phase: Phase,
    pub posterior: PosteriorSummary,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::field(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

async fn post_response(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<Acknowledgment>), ApiError> {
    let handle = app.session(&id).await?;
    let body: ResponseBody = parse_body(&body)?;
    let response = match body.response {
        -1 => Response::PreferSecond,
        0 => Response::Indifferent,
        1 => Response::PreferFirst,
        other => return Err(ApiError::field("response", format!("must be -1, 0 or 1, got {other}"))),
    };
    // Posterior sampling may take a while; keep it off the async workers.
    let mut guard = handle.clone().lock_owned().await;
    let (guard, posterior) = tokio::task::spawn_blocking(move || {
        let posterior = guard.submit_preference(body.m, response);
        (guard, posterior)
    })
    .await
    .map_err(|e| prefbo::Error::Numerical(e.to_string()))?;
    let st = guard.state();
    let ack = Acknowledgment {
        m: st.preferences.len(),
        phase: st.phase,
        posterior: posterior?,
    };
    drop(guard);
    spawn_optimization(handle);
    Ok((StatusCode::ACCEPTED, Json(ack)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluationBody {
    y: Vec<f64>,
    #[serde(default)]
    x: Option<Vec<f64>>,
}

async fn post_evaluation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionState>, ApiError> {
    let handle = app.session(&id).await?;
    let body: EvaluationBody = parse_body(&body)?;
    let mut s = handle.lock().await;
    s.submit_evaluation(body.x, body.y)?;
    Ok(Json(s.state().clone()))
}

async fn post_retry(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let handle = app.session(&id).await?;
    handle.lock().await.retry()?;
    spawn_optimization(handle);
    Ok(StatusCode::ACCEPTED)
}

async fn get_menu(State(app): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(app.snapshot(&id).await?.menu()))
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    /// Sequence number of the latest event.
    pub seq: u64,
    pub events: Vec<LoggedEvent>,
}

async fn get_events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<Since>,
) -> Result<Json<EventPage>, ApiError> {
    let handle = app.session(&id).await?;
    let s = handle.lock().await;
    let events = s.log().iter().filter(|e| e.seq > q.since).cloned().collect();
    Ok(Json(EventPage {
        seq: s.state().seq,
        events,
    }))
}
