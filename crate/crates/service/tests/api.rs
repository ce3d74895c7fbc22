use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use recourse_core::engines::{countergan_train, CounterganConfig, Method};
use recourse_core::model_io::{
    load_model_dir, save_autoencoder, save_classifier, save_gan, sha256_hex, AUTOENCODER_FILE,
    CLASSIFIER_FILE, DISCRIMINATOR_FILE, GENERATOR_FILE,
};
use recourse_core::predictors::{
    compute_prototypes, train_autoencoder, train_classifier, TrainConfig, DEFAULT_NOISE_STD,
};
use recourse_core::profiles::{generate_dataset, profile_to_map, split, Dataset, GeneratorConfig};
use recourse_core::Rand;
use recourse_service::{router, AppState, CounterfactualResponse, ScoreResponse, ServiceConfig};
use serde_json::{json, Map, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Models {
    dir: TempDir,
    test: Dataset,
}

/// Small models trained once and written to a temp model directory.
fn models() -> &'static Models {
    static CELL: OnceLock<Models> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = generate_dataset(&GeneratorConfig {
            n_samples: 600,
            seed: 11,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let (train, test) = split(&data, 0.8, &mut Rand::new(11)).unwrap();
        let (c, _) = train_classifier(
            &train,
            &test,
            &TrainConfig {
                epochs: 40,
                ..TrainConfig::classifier_default()
            },
        )
        .unwrap();
        let ae = train_autoencoder(
            &train,
            Some(&test),
            DEFAULT_NOISE_STD,
            &TrainConfig {
                epochs: 30,
                ..TrainConfig::autoencoder_default()
            },
        )
        .unwrap();
        let protos = compute_prototypes(&ae, &train, 5).unwrap();
        let gan = countergan_train(
            &c,
            &train,
            &CounterganConfig {
                steps: 400,
                ..CounterganConfig::for_width(33)
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        save_classifier(&c, &p.join(CLASSIFIER_FILE)).unwrap();
        save_autoencoder(&ae, Some(&protos), &p.join(AUTOENCODER_FILE)).unwrap();
        save_gan(&gan, &p.join(GENERATOR_FILE), &p.join(DISCRIMINATOR_FILE)).unwrap();
        Models { dir, test }
    })
}

fn app_for(dir: Option<&Path>) -> Router {
    let config = ServiceConfig {
        model_dir: dir.map(Path::to_path_buf),
        ..ServiceConfig::default()
    };
    router(Arc::new(AppState::load(config).unwrap()))
}

fn app() -> Router {
    app_for(Some(models().dir.path()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn profile(i: usize) -> Map<String, Value> {
    let t = &models().test;
    profile_to_map(&t.raw_profile(i), t.schema())
}

/// First test rows the loaded classifier rejects.
fn rejected_rows(n: usize) -> Vec<usize> {
    let bundle = load_model_dir(models().dir.path()).unwrap();
    let scores = bundle.classifier.predict_batch(models().test.rows()).unwrap();
    (0..scores.len()).filter(|&i| scores[i] < 0.5).take(n).collect()
}

#[tokio::test]
async fn without_models_the_service_is_degraded() {
    let empty = tempfile::tempdir().unwrap();
    let app = app_for(Some(empty.path()));
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["status"], "degraded");
    let (status, _) = call(&app, "POST", "/score", Some(json!({ "profile": profile(0) }))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _) = call(&app, "GET", "/schema", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn health_reports_file_hashes() {
    let (status, body) = call(&app(), "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    for name in [CLASSIFIER_FILE, AUTOENCODER_FILE, GENERATOR_FILE, DISCRIMINATOR_FILE] {
        let bytes = std::fs::read(models().dir.path().join(name)).unwrap();
        assert_eq!(body["model_hashes"][name], json!(sha256_hex(&bytes)));
    }
}

#[tokio::test]
async fn schema_lists_features_and_is_stable() {
    let app = app();
    let resp = app
        .clone()
        .oneshot(Request::get("/schema").body(Body::empty()).unwrap())
        .await
        .unwrap();
    let etag = resp.headers()["etag"].clone();
    let (status, body) = call(&app, "GET", "/schema", None).await;
    assert_eq!(status, StatusCode::OK);
    let features = body["features"].as_array().unwrap();
    assert_eq!(features.len(), 33);
    assert_eq!(features.iter().filter(|f| f["mutable"] == true).count(), 6);
    let salary = features.iter().find(|f| f["name"] == "expected_salary").unwrap();
    assert_eq!(salary["kind"].to_string(), r#"{"multiple_of":5000}"#);
    assert!(features.iter().any(|f| f["kind"] == "integer"));
    assert!(features.iter().any(|f| f["kind"] == "continuous"));
    let again = app
        .oneshot(Request::get("/schema").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(again.headers()["etag"], etag);
}

#[tokio::test]
async fn score_matches_the_library_exactly() {
    let bundle = load_model_dir(models().dir.path()).unwrap();
    let app = app();
    for i in 0..5 {
        let (status, body) = call(&app, "POST", "/score", Some(json!({ "profile": profile(i) }))).await;
        assert_eq!(status, StatusCode::OK);
        let r: ScoreResponse = serde_json::from_value(body).unwrap();
        let direct = bundle
            .classifier
            .predict(&models().test.normalized_profile(i))
            .unwrap();
        assert_eq!(r.score.to_bits(), direct.to_bits());
        assert_eq!(r.approved, direct >= 0.5);
    }
    let (status, _) = call(&app, "POST", "/score", Some(Value::Object(profile(0)))).await;
    assert_eq!(status, StatusCode::OK, "flat body is accepted");
}

#[tokio::test]
async fn score_errors_name_the_feature() {
    let app = app();
    let mut p = profile(0);
    p.remove("expected_salary");
    let (status, body) = call(&app, "POST", "/score", Some(json!({ "profile": p }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "expected_salary");
    assert!(body["error"].as_str().unwrap().contains("expected_salary"));

    let mut p = profile(0);
    p.insert("favourite_colour".into(), json!(3));
    let (status, body) = call(&app, "POST", "/score", Some(json!({ "profile": p }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "favourite_colour");

    let (status, _) = call(&app, "POST", "/score", Some(json!([1, 2]))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn counterfactual_contract() {
    let app = app();
    let schema = models().test.schema().clone();
    for i in rejected_rows(3) {
        for method in Method::ALL {
            let req = json!({ "profile": profile(i), "method": method.as_str() });
            let (status, body) = call(&app, "POST", "/counterfactual", Some(req)).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            let r: CounterfactualResponse = serde_json::from_value(body).unwrap();
            assert_eq!(r.method, method);
            assert_eq!(r.approved_before, r.score_before >= 0.5);
            assert_eq!(r.approved_after, r.score_after >= 0.5);
            let mut applied = profile(i);
            for e in &r.diff {
                assert!(schema.feature(&e.feature).unwrap().mutable, "{}", e.feature);
                assert_eq!(e.old + e.delta, e.new);
                applied.insert(e.feature.clone(), json!(e.new));
            }
            assert_eq!(applied, r.counterfactual);
            if method == Method::Countergan {
                assert!(r.latency_ms < 50.0, "latency {}", r.latency_ms);
            }
            let (_, rescored) = call(&app, "POST", "/score", Some(json!({ "profile": applied }))).await;
            let s = rescored["score"].as_f64().unwrap();
            assert!((s - r.score_after).abs() <= 1e-9);
        }
    }
}

#[tokio::test]
async fn counterfactual_error_statuses() {
    let app = app();
    let (status, body) = call(
        &app,
        "POST",
        "/counterfactual",
        Some(json!({ "profile": profile(0), "method": "gan2" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "method");

    let mut p = profile(0);
    p.insert("expected_salary".into(), json!(123.0));
    let (status, body) = call(
        &app,
        "POST",
        "/counterfactual",
        Some(json!({ "profile": p, "method": "rgd" })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!body["violations"].as_array().unwrap().is_empty());

    let (status, _) = call(
        &app,
        "POST",
        "/counterfactual",
        Some(json!({ "profile": profile(0), "options": { "bogus": 1 } })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(
        &app,
        "POST",
        "/counterfactual",
        Some(json!({ "profile": profile(0), "method": "rgd", "options": { "max_iters": 0 } })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn bounds_override_is_honoured() {
    let app = app();
    let i = rejected_rows(1)[0];
    let req = json!({
        "profile": profile(i),
        "method": "rgd",
        "options": { "enforce_bounds": true },
    });
    let (status, body) = call(&app, "POST", "/counterfactual", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let r: CounterfactualResponse = serde_json::from_value(body).unwrap();
    let schema = models().test.schema();
    for f in schema.features() {
        let v = r.counterfactual[&f.name].as_f64().unwrap();
        assert!(v >= f.lower_bound && v <= f.upper_bound, "{} = {v}", f.name);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_identical_requests_agree() {
    let app = app();
    let i = rejected_rows(1)[0];
    let req = json!({ "profile": profile(i), "method": "csgp" });
    let tasks: Vec<_> = (0..4)
        .map(|_| {
            let app = app.clone();
            let req = req.clone();
            tokio::spawn(async move { call(&app, "POST", "/counterfactual", Some(req)).await })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        let (status, mut body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        body.as_object_mut().unwrap().remove("latency_ms");
        bodies.push(body);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn models_endpoint_echoes_metadata() {
    let bundle = load_model_dir(models().dir.path()).unwrap();
    let (status, body) = call(&app(), "GET", "/models", None).await;
    assert_eq!(status, StatusCode::OK);
    let c = &body["models"]["classifier"];
    assert_eq!(c["seed"], json!(bundle.classifier.meta.seed));
    assert_eq!(c["metrics"]["test_accuracy"], json!(bundle.classifier.meta.test_accuracy));
    assert_eq!(body["models"]["generator"]["seed"], json!(bundle.gan.config.seed));
    assert_eq!(body["schema_hash"], json!(bundle.classifier.schema.hash()));
}

#[tokio::test]
async fn request_log_records_each_call() {
    let logdir = tempfile::tempdir().unwrap();
    let log = logdir.path().join("requests.jsonl");
    let config = ServiceConfig {
        model_dir: Some(models().dir.path().to_path_buf()),
        request_log: Some(log.clone()),
        ..ServiceConfig::default()
    };
    let app = router(Arc::new(AppState::load(config).unwrap()));
    call(&app, "GET", "/health", None).await;
    call(&app, "GET", "/nope", None).await;
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["path"], "/health");
    assert_eq!(lines[1]["status"], 404);
}
