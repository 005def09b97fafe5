//! HTTP front door for a model lake.
//!
//! One process owns the lake directory. Writes take the lake's write lock,
//! so they are serialized and each is fsynced to the record log before its
//! response goes out; reads share the lock and never wait on each other.

pub mod api;

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, PoisonError, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, RawQuery, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use modellake::governance::DEFAULT_SWAMP_THRESHOLD;
use modellake::{Lake, LakeError};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::api::{ApiError, Query, Write};

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";
pub const DEFAULT_DATA_DIR: &str = "mlk-data";
const MAX_ARTIFACT_BYTES: usize = 512 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lake(#[from] LakeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub swamp_threshold: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            data_dir: DEFAULT_DATA_DIR.into(),
            swamp_threshold: DEFAULT_SWAMP_THRESHOLD,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `MLK_BIND`, `MLK_DATA_DIR` and
    /// `MLK_SWAMP_THRESHOLD`.
    pub fn from_env() -> Result<Self, ServeError> {
        let mut c = Self::default();
        if let Ok(b) = std::env::var("MLK_BIND") {
            c.bind = b;
        }
        if let Ok(d) = std::env::var("MLK_DATA_DIR") {
            c.data_dir = d.into();
        }
        if let Ok(t) = std::env::var("MLK_SWAMP_THRESHOLD") {
            c.swamp_threshold = t
                .parse()
                .map_err(|_| ServeError::Config(format!("MLK_SWAMP_THRESHOLD '{t}'")))?;
        }
        Ok(c)
    }
}

struct AppState {
    lake: RwLock<Lake>,
    swamp_threshold: f64,
}

type Shared = Arc<AppState>;

/// A running service. Dropping the handle leaves the server running until
/// the runtime shuts down; call [`ServiceHandle::shutdown`] to stop it.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.wait().await
    }

    /// Waits until the server stops.
    pub async fn wait(self) -> io::Result<()> {
        self.task.await.map_err(io::Error::other)?
    }
}

/// Binds, opens (or creates) the lake and starts serving. The port is
/// claimed before the lake is touched, so a busy port leaves no state.
pub async fn serve(config: ServiceConfig) -> Result<ServiceHandle, ServeError> {
    if !config.swamp_threshold.is_finite() {
        return Err(ServeError::Config("swamp threshold must be finite".into()));
    }
    let listener = TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind {
        addr: config.bind.clone(),
        source,
    })?;
    let dir = config.data_dir.clone();
    let lake = tokio::task::spawn_blocking(move || {
        if Lake::exists(&dir) {
            Lake::open(&dir)
        } else {
            Lake::init(&dir)
        }
    })
    .await
    .map_err(|e| ServeError::Lake(LakeError::Io(io::Error::other(e))))??;
    tracing::info!(%addr, records = lake.record_count(), "model lake service started");

    let state = Arc::new(AppState {
        lake: RwLock::new(lake),
        swamp_threshold: config.swamp_threshold,
    });
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(state);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServiceHandle {
        addr,
        stop: Some(stop),
        task,
    })
}

fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/artifacts", post(put_artifact))
        .route("/{collection}", post(register))
        .route("/search", get(search))
        .route("/lineage/{id}", get(lineage))
        .route("/versions/{id}", get(versions))
        .route("/diff/{a}/{b}", get(diff))
        .route("/audit/compliance/{model}", get(compliance))
        .route("/audit/repro/{analysis}", get(repro))
        .route("/audit/bias/{model}", get(bias))
        .route("/audit/evolution/{head}", get(evolution))
        .route("/audit/health", get(audit_health))
        .route("/projects/{study_id}", get(project))
        .fallback(|| async { error_response(&ApiError::new("not_found", "no such endpoint")) })
        .layer(DefaultBodyLimit::max(MAX_ARTIFACT_BYTES))
        .with_state(state)
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        Body::from(body),
    )
        .into_response()
}

fn error_response(e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    json_response(status, api::to_body(e))
}

fn params(raw: Option<String>) -> Vec<(String, String)> {
    form_urlencoded::parse(raw.unwrap_or_default().as_bytes())
        .into_owned()
        .collect()
}

fn single_params(
    raw: Option<String>,
    allowed: &[&str],
) -> Result<HashMap<String, String>, ApiError> {
    let mut out = HashMap::new();
    for (k, v) in params(raw) {
        if !allowed.contains(&k.as_str()) {
            return Err(ApiError::invalid_query(format!("unknown parameter '{k}'")));
        }
        out.insert(k, v);
    }
    Ok(out)
}

async fn run_query(state: Shared, q: Result<Query, ApiError>) -> Response {
    let q = match q {
        Ok(q) => q,
        Err(e) => return error_response(&e),
    };
    let result = tokio::task::spawn_blocking(move || {
        let lake = state.lake.read().unwrap_or_else(PoisonError::into_inner);
        api::query(&lake, state.swamp_threshold, &q)
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::new("internal", e.to_string())));
    match result {
        Ok(v) => json_response(StatusCode::OK, api::to_body(&v)),
        Err(e) => error_response(&e),
    }
}

async fn run_write(state: Shared, w: Result<Write, ApiError>) -> Response {
    let w = match w {
        Ok(w) => w,
        Err(e) => return error_response(&e),
    };
    let result = tokio::task::spawn_blocking(move || {
        let mut lake = state.lake.write().unwrap_or_else(PoisonError::into_inner);
        api::write(&mut lake, w)
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::new("internal", e.to_string())));
    match result {
        Ok((created, v)) => {
            let status = if created {
                StatusCode::CREATED
            } else {
                StatusCode::OK
            };
            json_response(status, api::to_body(&v))
        }
        Err(e) => error_response(&e),
    }
}

async fn health(State(s): State<Shared>) -> Response {
    run_query(s, Ok(Query::Status)).await
}

async fn put_artifact(State(s): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    let kind = headers
        .get("x-artifact-kind")
        .ok_or_else(|| ApiError::invalid_query("missing X-Artifact-Kind header"))
        .and_then(|v| {
            v.to_str()
                .ok()
                .and_then(|k| k.trim().parse().ok())
                .ok_or_else(|| ApiError::invalid_query("unknown X-Artifact-Kind"))
        });
    let w = kind.map(|kind| Write::Artifact {
        payload: body.to_vec(),
        kind,
    });
    run_write(s, w).await
}

async fn register(
    State(s): State<Shared>,
    Path(collection): Path<String>,
    body: Bytes,
) -> Response {
    let Some(record_type) = api::record_type_for(&collection) else {
        return error_response(&ApiError::new(
            "not_found",
            format!("no collection '{collection}'"),
        ));
    };
    let w = Write::Register {
        record_type,
        body: body.to_vec(),
    };
    run_write(s, Ok(w)).await
}

async fn search(State(s): State<Shared>, RawQuery(raw): RawQuery) -> Response {
    run_query(s, api::search_from_params(params(raw)).map(Query::Search)).await
}

async fn lineage(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    run_query(s, Ok(Query::Lineage(id))).await
}

async fn versions(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    run_query(s, Ok(Query::Versions(id))).await
}

async fn diff(State(s): State<Shared>, Path((a, b)): Path<(String, String)>) -> Response {
    run_query(s, Ok(Query::Diff(a, b))).await
}

async fn compliance(
    State(s): State<Shared>,
    Path(model): Path<String>,
    RawQuery(raw): RawQuery,
) -> Response {
    let q = single_params(raw, &["approved"]).map(|p| Query::Compliance {
        model,
        approved: api::approved_from_param(p.get("approved").map(String::as_str)),
    });
    run_query(s, q).await
}

async fn repro(State(s): State<Shared>, Path(analysis): Path<String>) -> Response {
    run_query(s, Ok(Query::Repro(analysis))).await
}

async fn bias(State(s): State<Shared>, Path(model): Path<String>) -> Response {
    run_query(s, Ok(Query::Bias(model))).await
}

async fn evolution(State(s): State<Shared>, Path(head): Path<String>) -> Response {
    run_query(s, Ok(Query::Evolution(head))).await
}

async fn audit_health(State(s): State<Shared>, RawQuery(raw): RawQuery) -> Response {
    let q = single_params(raw, &["threshold"]).and_then(|p| {
        Ok(Query::Health {
            threshold: api::threshold_from_param(p.get("threshold").map(String::as_str))?,
        })
    });
    run_query(s, q).await
}

async fn project(State(s): State<Shared>, Path(study): Path<String>) -> Response {
    run_query(s, Ok(Query::Project(study))).await
}
