use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use recourse_core::benchmark::{Clock, MonotonicClock};
use recourse_core::engines::{
    countergan_generate_with, csgp_generate, make_diff, rgd_generate, CfResult, CsgpConfig,
    DiffEntry, Method, RgdConfig,
};
use recourse_core::predictors::DECISION_THRESHOLD;
use recourse_core::profiles::{profile_to_map, FeatureKind, ProfileSchema, RawProfile};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::{AppState, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub violations: Vec<String>,
}

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                field: None,
                violations: Vec::new(),
            },
        }
    }

    fn field(status: StatusCode, field: &str, error: impl Into<String>) -> Self {
        let mut e = Self::new(status, error);
        e.body.field = Some(field.to_string());
        e
    }

    fn unavailable() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "models are not loaded")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Approval at the decision threshold, inclusive.
pub fn approved(score: f64) -> bool {
    score >= DECISION_THRESHOLD
}

fn loaded(state: &AppState) -> ApiResult<Arc<Snapshot>> {
    state.snapshot().cloned().ok_or_else(ApiError::unavailable)
}

fn parse_body(body: &Bytes) -> ApiResult<Map<String, Value>> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::new(StatusCode::BAD_REQUEST, "body must be a JSON object")),
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}"))),
    }
}

/// Reads a flat profile object, either the whole body or its `profile` key.
/// Unknown and missing features are 400s; bound and kind violations are 422s.
fn parse_profile(body: &Map<String, Value>, schema: &ProfileSchema) -> ApiResult<RawProfile> {
    let obj = match body.get("profile") {
        Some(Value::Object(p)) => p,
        Some(_) => {
            return Err(ApiError::field(
                StatusCode::BAD_REQUEST,
                "profile",
                "`profile` must be an object keyed by feature name",
            ))
        }
        None => body,
    };
    for key in obj.keys() {
        if schema.index_of(key).is_none() {
            return Err(ApiError::field(
                StatusCode::BAD_REQUEST,
                key,
                format!("unknown feature `{key}`"),
            ));
        }
    }
    let mut values = Vec::with_capacity(schema.len());
    for f in schema.features() {
        let v = obj.get(&f.name).ok_or_else(|| {
            ApiError::field(
                StatusCode::BAD_REQUEST,
                &f.name,
                format!("missing feature `{}`", f.name),
            )
        })?;
        let x = v.as_f64().ok_or_else(|| {
            ApiError::field(
                StatusCode::BAD_REQUEST,
                &f.name,
                format!("feature `{}` is not a number", f.name),
            )
        })?;
        values.push(x);
    }
    let raw = RawProfile(values);
    let violations = schema
        .violations(&raw)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    if !violations.is_empty() {
        let mut e = ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "profile violates the schema's bounds or kinds",
        );
        e.body.violations = violations;
        return Err(e);
    }
    Ok(raw)
}

fn score_of(snapshot: &Snapshot, raw: &RawProfile) -> ApiResult<f64> {
    let c = &snapshot.bundle.classifier;
    let x = c
        .schema
        .normalize(raw)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    c.predict(&x)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

fn kind_json(kind: FeatureKind) -> Value {
    match kind {
        FeatureKind::Continuous => json!("continuous"),
        FeatureKind::Integer => json!("integer"),
        // Whole-number steps are written as integers: {"multiple_of": 5000}.
        FeatureKind::MultipleOf(s) if s.fract() == 0.0 && s.abs() < 9e15 => {
            json!({ "multiple_of": s as i64 })
        }
        FeatureKind::MultipleOf(s) => json!({ "multiple_of": s }),
    }
}

pub(crate) async fn schema(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let snap = loaded(&state)?;
    let schema = &snap.bundle.classifier.schema;
    let hash = schema.hash();
    let features: Vec<Value> = schema
        .features()
        .iter()
        .map(|f| {
            json!({
                "name": f.name,
                "kind": kind_json(f.kind),
                "mutable": f.mutable,
                "lower_bound": f.lower_bound,
                "upper_bound": f.upper_bound,
            })
        })
        .collect();
    let mut resp = Json(json!({ "schema_hash": hash, "features": features })).into_response();
    if let Ok(v) = HeaderValue::from_str(&format!("\"{hash}\"")) {
        resp.headers_mut().insert(header::ETAG, v);
    }
    Ok(resp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
    pub approved: bool,
}

pub(crate) async fn score(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<Json<ScoreResponse>> {
    let snap = loaded(&state)?;
    let body = parse_body(&body)?;
    let raw = parse_profile(&body, &snap.bundle.classifier.schema)?;
    let score = score_of(&snap, &raw)?;
    Ok(Json(ScoreResponse {
        score,
        approved: approved(score),
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestOptions {
    pub enforce_bounds: Option<bool>,
    /// Iteration budget for RGD and CSGP.
    pub max_iters: Option<usize>,
    /// RGD stopping score.
    pub target_prob: Option<f64>,
}

/// Typed view of the request body, for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRequest {
    pub profile: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub options: Option<RequestOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResponse {
    pub method: Method,
    pub counterfactual: Map<String, Value>,
    pub diff: Vec<DiffEntry>,
    pub score_before: f64,
    pub score_after: f64,
    pub approved_before: bool,
    pub approved_after: bool,
    pub latency_ms: f64,
}

fn run_method(
    snap: &Snapshot,
    method: Method,
    raw: &RawProfile,
    options: &RequestOptions,
    enforce_override: Option<bool>,
) -> recourse_core::Result<CfResult> {
    let b = &snap.bundle;
    let enforce = options.enforce_bounds.or(enforce_override);
    match method {
        Method::Rgd => {
            let cfg = RgdConfig {
                enforce_bounds: enforce.unwrap_or(snap.rgd.enforce_bounds),
                max_iters: options.max_iters.unwrap_or(snap.rgd.max_iters),
                target_prob: options.target_prob.unwrap_or(snap.rgd.target_prob),
                ..snap.rgd
            };
            rgd_generate(&b.classifier, raw, &cfg)
        }
        Method::Csgp => {
            let cfg = CsgpConfig {
                enforce_bounds: enforce.unwrap_or(snap.csgp.enforce_bounds),
                max_iters: options.max_iters.unwrap_or(snap.csgp.max_iters),
                ..snap.csgp
            };
            csgp_generate(&b.classifier, &b.ae, &b.prototypes, raw, &cfg)
        }
        Method::Countergan => {
            countergan_generate_with(&b.gan, &b.classifier, raw, enforce.unwrap_or(true))
        }
    }
}

pub(crate) async fn counterfactual(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<Json<CounterfactualResponse>> {
    let snap = loaded(&state)?;
    let body = parse_body(&body)?;
    let method = match body.get("method") {
        None | Some(Value::Null) => state.config.default_method,
        Some(Value::String(s)) => s
            .parse::<Method>()
            .map_err(|e| ApiError::field(StatusCode::BAD_REQUEST, "method", e.to_string()))?,
        Some(_) => {
            return Err(ApiError::field(
                StatusCode::BAD_REQUEST,
                "method",
                "`method` must be a string",
            ))
        }
    };
    let options: RequestOptions = match body.get("options") {
        None | Some(Value::Null) => RequestOptions::default(),
        Some(v) => RequestOptions::deserialize(v)
            .map_err(|e| ApiError::field(StatusCode::BAD_REQUEST, "options", e.to_string()))?,
    };
    if !body.contains_key("profile") {
        return Err(ApiError::field(StatusCode::BAD_REQUEST, "profile", "missing `profile`"));
    }
    let raw = parse_profile(&body, &snap.bundle.classifier.schema)?;
    let enforce_override = state.config.enforce_bounds;

    let worker = Arc::clone(&snap);
    let (result, latency_ms) = tokio::task::spawn_blocking(move || {
        let mut clock = MonotonicClock::new();
        let t0 = clock.now();
        let r = run_method(&worker, method, &raw, &options, enforce_override)
            .and_then(|r| {
                let diff = make_diff(&raw, &r, &worker.bundle.classifier.schema)?;
                Ok((r, diff))
            });
        let ms = clock.now().saturating_sub(t0).as_secs_f64() * 1e3;
        (r, ms)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    let (r, diff) = result.map_err(|e| {
        let status = match e {
            recourse_core::Error::Spec(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, format!("{method} failed: {e}"))
    })?;
    Ok(Json(CounterfactualResponse {
        method,
        counterfactual: profile_to_map(&r.x_cf_raw, &snap.bundle.classifier.schema),
        diff: diff.entries,
        score_before: r.score_before,
        score_after: r.score_after,
        approved_before: approved(r.score_before),
        approved_after: approved(r.score_after),
        latency_ms,
    }))
}

pub(crate) async fn health(State(state): State<Arc<AppState>>) -> Response {
    match state.snapshot() {
        Some(snap) => Json(json!({
            "status": "ok",
            "model_hashes": snap.bundle.file_hashes,
        }))
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({
                "status": "degraded",
                "model_hashes": {},
                "error": state.load_error(),
            })),
        )
            .into_response(),
    }
}

pub(crate) async fn models(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let snap = loaded(&state)?;
    Ok(Json(json!({
        "schema_hash": snap.bundle.classifier.schema.hash(),
        "models": snap.bundle.summaries,
        "file_hashes": snap.bundle.file_hashes,
    })))
}
