//! HTTP API over a loaded topology and rule set.
//!
//! | route              | body / response                                   |
//! |--------------------|---------------------------------------------------|
//! | `GET /topology`    | topology document                                 |
//! | `PUT /topology`    | topology document; clears loaded rules            |
//! | `GET /rules`       | rules document                                    |
//! | `PUT /rules`       | rules document                                    |
//! | `POST /discover`   | discovery request, answered with a discovery result |
//!
//! A discovery request with `"dry_run": true` is checked and answered with `{"probes": n}`
//! without sending anything.
//! | `GET /probes`      | summaries of recent probes, oldest first          |
//! | `GET /probes/{uid}`| one discovery entry                               |
//!
//! Documents are JSON, or TOML when the request's content type mentions `toml`. Failures are
//! answered with `{"error": "..."}`.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use crate::discovery::{
    discover, plan, Backend, BackendSpec, DiscoveryEntry, DiscoveryRequest, Status,
};
use crate::formats::{ingest_log, Encoding, Rules, Topology};
use crate::Settings;

pub struct AppState {
    settings: Settings,
    loaded: RwLock<Loaded>,
    history: Mutex<VecDeque<DiscoveryEntry>>,
}

#[derive(Default, Clone)]
struct Loaded {
    topology: Option<Arc<Topology>>,
    rules: Option<Arc<Rules>>,
}

impl AppState {
    pub fn new(settings: Settings) -> Arc<Self> {
        Arc::new(Self {
            settings,
            loaded: RwLock::default(),
            history: Mutex::default(),
        })
    }

    /// Installs a topology and optionally rules compiled against it.
    pub fn load(&self, topology: Topology, rules: Option<Rules>) {
        let mut l = self.loaded.write().expect("state lock");
        l.topology = Some(Arc::new(topology));
        l.rules = rules.map(Arc::new);
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn snapshot(&self) -> Loaded {
        self.loaded.read().expect("state lock").clone()
    }

    fn remember(&self, entries: &[DiscoveryEntry]) {
        let cap = self.settings.history_capacity;
        let mut h = self.history.lock().expect("history lock");
        for e in entries {
            h.push_back(e.clone());
        }
        while h.len() > cap {
            h.pop_front();
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/topology", get(get_topology).put(put_topology))
        .route("/rules", get(get_rules).put(put_rules))
        .route("/discover", post(post_discover))
        .route("/probes", get(list_probes))
        .route("/probes/{uid}", get(get_probe))
        .with_state(state)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, e.to_string())
}

fn encoding(headers: &HeaderMap) -> Encoding {
    let toml = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("toml"));
    if toml {
        Encoding::Toml
    } else {
        Encoding::Json
    }
}

fn require_topology(l: &Loaded) -> Result<Arc<Topology>, ApiError> {
    l.topology
        .clone()
        .ok_or_else(|| ApiError(StatusCode::CONFLICT, "no topology loaded".into()))
}

async fn get_topology(State(s): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let t = s
        .snapshot()
        .topology
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "no topology loaded".into()))?;
    Ok(Json(t.doc.clone()).into_response())
}

async fn put_topology(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    let topo = encoding(&headers)
        .decode(&body)
        .and_then(Topology::from_doc)
        .map_err(bad_request)?;
    let summary = json!({
        "hosts": topo.plane.host_count(),
        "switches": topo.plane.switches().count(),
        "links": topo.plane.link_count(),
    });
    s.load(topo, None);
    Ok(Json(summary).into_response())
}

async fn get_rules(State(s): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let r = s
        .snapshot()
        .rules
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "no rules loaded".into()))?;
    Ok(Json(r.doc.clone()).into_response())
}

async fn put_rules(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    let topo = require_topology(&s.snapshot())?;
    let rules = encoding(&headers)
        .decode(&body)
        .and_then(|doc| Rules::compile(&topo, doc))
        .map_err(bad_request)?;
    let summary =
        json!({ "rules": rules.config.rule_count(), "forward_once": rules.config.forward_once() });
    let mut l = s.loaded.write().expect("state lock");
    if !l.topology.as_ref().is_some_and(|t| Arc::ptr_eq(t, &topo)) {
        return Err(ApiError(
            StatusCode::CONFLICT,
            "topology changed meanwhile".into(),
        ));
    }
    l.rules = Some(Arc::new(rules));
    Ok(Json(summary).into_response())
}

async fn post_discover(State(s): State<Arc<AppState>>, body: String) -> Result<Response, ApiError> {
    let req: DiscoveryRequest = serde_json::from_str(&body).map_err(bad_request)?;
    let loaded = s.snapshot();
    let topo = require_topology(&loaded)?;
    let rules = loaded.rules.clone();
    let limit = s.settings.enumeration_limit;
    if req.dry_run {
        let probes = tokio::task::spawn_blocking(move || plan(&topo, &req, limit).map(|p| p.len()))
            .await
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
            .map_err(bad_request)?;
        return Ok(Json(json!({ "probes": probes })).into_response());
    }
    let result = tokio::task::spawn_blocking(move || match &req.backend {
        BackendSpec::Simulate => {
            let rules =
                rules.ok_or_else(|| ApiError(StatusCode::CONFLICT, "no rules loaded".into()))?;
            discover(&topo, &req, Backend::Simulate(&rules.config), limit).map_err(bad_request)
        }
        BackendSpec::Log { observations } => {
            let log = ingest_log(&topo.plane, observations).map_err(bad_request)?;
            discover(&topo, &req, Backend::Log(&log), limit).map_err(bad_request)
        }
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    s.remember(&result.entries);
    Ok(Json(result).into_response())
}

#[derive(Serialize)]
struct ProbeSummary {
    uid: String,
    host: String,
    status: Status,
    paths: usize,
}

async fn list_probes(State(s): State<Arc<AppState>>) -> Json<Vec<ProbeSummary>> {
    let h = s.history.lock().expect("history lock");
    Json(
        h.iter()
            .map(|e| ProbeSummary {
                uid: e.uid.clone(),
                host: e.host.clone(),
                status: e.status,
                paths: e.paths.len(),
            })
            .collect(),
    )
}

async fn get_probe(
    State(s): State<Arc<AppState>>,
    Path(uid): Path<String>,
) -> Result<Response, ApiError> {
    let h = s.history.lock().expect("history lock");
    h.iter()
        .rev()
        .find(|e| e.uid == uid)
        .map(|e| Json(e.clone()).into_response())
        .ok_or_else(|| {
            ApiError(
                StatusCode::NOT_FOUND,
                format!("no probe `{uid}` in history"),
            )
        })
}
