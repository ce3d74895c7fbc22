//! HTTP/JSON feedback service over an immutable snapshot of trained models.
//!
//! | Route | Purpose |
//! |---|---|
//! | `GET /schema` | feature list with kinds, mutability and bounds |
//! | `POST /score` | classifier score and approval for one profile |
//! | `POST /counterfactual` | one method's suggestion as a feature diff |
//! | `GET /health` | `ok` or `degraded`, plus model file hashes |
//! | `GET /models` | training metadata of the loaded models |
//!
//! Profiles are flat JSON objects keyed by feature name. Models are loaded
//! once at startup; handlers only read the snapshot.

mod api;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Request, State};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use recourse_core::engines::{CsgpConfig, Method, RgdConfig};
use recourse_core::model_io::{load_model_dir, ModelBundle};

pub use api::{
    approved, CounterfactualRequest, CounterfactualResponse, ErrorBody, RequestOptions,
    ScoreResponse,
};

/// Environment variables read by the CLI as flag fallbacks.
pub const MODEL_DIR_ENV: &str = "RECOURSE_MODEL_DIR";
pub const BIND_ENV: &str = "RECOURSE_BIND";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub model_dir: Option<PathBuf>,
    pub default_method: Method,
    /// Overrides every method's bounds policy when set.
    pub enforce_bounds: Option<bool>,
    /// JSON-lines access log.
    pub request_log: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            model_dir: None,
            default_method: Method::Countergan,
            enforce_bounds: None,
            request_log: None,
        }
    }
}

/// Models plus the engine settings used to query them.
#[derive(Debug)]
pub struct Snapshot {
    pub bundle: ModelBundle,
    pub rgd: RgdConfig,
    pub csgp: CsgpConfig,
}

#[derive(Debug)]
pub struct AppState {
    pub config: ServiceConfig,
    snapshot: Option<Arc<Snapshot>>,
    load_error: Option<String>,
    log: Option<Mutex<File>>,
}

impl AppState {
    /// Loads `config.model_dir`. A missing or broken directory leaves the
    /// service running in degraded mode.
    pub fn load(config: ServiceConfig) -> std::io::Result<Self> {
        let (snapshot, load_error) = match &config.model_dir {
            None => (None, Some("no model directory configured".to_string())),
            Some(dir) => match load_model_dir(dir) {
                Ok(bundle) => (Some(bundle), None),
                Err(e) => (None, Some(e.to_string())),
            },
        };
        let mut state = Self::new(config, snapshot)?;
        state.load_error = load_error;
        Ok(state)
    }

    pub fn new(config: ServiceConfig, bundle: Option<ModelBundle>) -> std::io::Result<Self> {
        let log = match &config.request_log {
            Some(p) => Some(Mutex::new(
                OpenOptions::new().create(true).append(true).open(p)?,
            )),
            None => None,
        };
        Ok(Self {
            snapshot: bundle.map(|bundle| {
                Arc::new(Snapshot {
                    bundle,
                    rgd: RgdConfig::default(),
                    csgp: CsgpConfig::default(),
                })
            }),
            load_error: None,
            log,
            config,
        })
    }

    pub fn snapshot(&self) -> Option<&Arc<Snapshot>> {
        self.snapshot.as_ref()
    }

    pub fn load_error(&self) -> Option<&str> {
        self.load_error.as_deref()
    }
}

async fn log_requests(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let Some(log) = state.log.as_ref() else {
        return next.run(req).await;
    };
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let start = std::time::Instant::now();
    let resp = next.run(req).await;
    let line = serde_json::json!({
        "method": method,
        "path": path,
        "status": resp.status().as_u16(),
        "latency_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    if let Ok(mut f) = log.lock() {
        let _ = writeln!(f, "{line}");
    }
    resp
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/schema", get(api::schema))
        .route("/score", post(api::score))
        .route("/counterfactual", post(api::counterfactual))
        .route("/health", get(api::health))
        .route("/models", get(api::models))
        .layer(middleware::from_fn_with_state(Arc::clone(&state), log_requests))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let bind = config.bind;
    let state = Arc::new(AppState::load(config)?);
    if let Some(e) = state.load_error() {
        eprintln!("warning: serving in degraded mode: {e}");
    }
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
