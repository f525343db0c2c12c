use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use random_wheel::dataset::{parse_dataset, ParseOptions};
use random_wheel::wheel::train;
use random_wheel::{AttributeKind, AttributeSchema, RandomWheelModel, WheelConfig};
use random_wheel_service::{router, AppState, LoadedModel, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn model() -> RandomWheelModel {
    let schema = vec![
        AttributeSchema::new("paid", AttributeKind::Categorical, 0),
        AttributeSchema::new("income", AttributeKind::Real, 1),
        AttributeSchema::new("years", AttributeKind::Integer, 2),
    ];
    let mut text = String::new();
    for i in 0..100 {
        let good = i % 5 < 2;
        let paid = if good ^ (i % 13 == 0) { "t" } else { "f" };
        let income = if good { 40.0 } else { 25.0 } + (i % 7) as f64 * 2.1;
        text.push_str(&format!("{paid},{income:.1},{},{}\n", i % 6, if good { "+" } else { "-" }));
    }
    let options = ParseOptions { class_column: 3, class_tokens: Some(vec!["+".into(), "-".into()]) };
    let ds = parse_dataset(&text, &schema, &options).unwrap();
    train(ds, WheelConfig { trials: 30, seed: 5, ..Default::default() }).unwrap()
}

fn config() -> ServiceConfig {
    ServiceConfig {
        bind: "127.0.0.1:0".parse().unwrap(),
        model_path: "unused".into(),
        max_body_bytes: 1024,
        request_timeout: Duration::from_secs(10),
        cors_origins: vec!["http://console.local".into()],
    }
}

fn app() -> Router {
    router(AppState::with_model(LoadedModel::new(model()).unwrap()), &config())
}

async fn send(app: Router, request: Request<Body>) -> (StatusCode, Vec<u8>) {
    let response = app.oneshot(request).await.unwrap();
    let status = response.status();
    (status, response.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: Router, body: impl Into<Body>) -> (StatusCode, Value) {
    let request = Request::post("/v1/recommendations")
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap();
    let (status, bytes) = send(app, request).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_reflects_loading() {
    let state = AppState::default();
    let app = router(state.clone(), &config());
    assert_eq!(get(app.clone(), "/healthz").await.0, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(get(app.clone(), "/v1/model").await.0, StatusCode::SERVICE_UNAVAILABLE);
    state.install(LoadedModel::new(model()).unwrap());
    let (status, body) = get(app, "/healthz").await;
    assert_eq!((status, body.as_slice()), (StatusCode::OK, b"ok".as_slice()));
}

#[tokio::test]
async fn recommendation_contract() {
    let (status, body) = post(app(), json!({"paid": "t", "income": 44.0, "years": 2}).to_string()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["label"], "+");
    assert_eq!(body["approve"], true);
    let confidence = body["confidence"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&confidence));
    let percentages: Vec<f64> =
        body["attributions"].as_array().unwrap().iter().map(|a| a["percentage"].as_f64().unwrap()).collect();
    assert!(percentages.windows(2).all(|w| w[0] >= w[1]));
    assert!((percentages.iter().sum::<f64>() - 100.0).abs() < 1e-6);
    assert_eq!(body["trial_count"], 30);
    assert!(body["model_version"].as_str().unwrap().starts_with("v1-"));
}

#[tokio::test]
async fn identical_requests_give_identical_bodies() {
    let request = || json!({"paid": "f", "income": "31.5", "years": null}).to_string();
    let first = post(app(), request()).await;
    let concurrent = concurrent_posts(request).await;
    for other in concurrent {
        assert_eq!(other, first);
    }
    // key order in the body does not matter
    let reordered = post(app(), r#"{"years": null, "income": 31.5, "paid": "f"}"#).await;
    assert_eq!(reordered, first);
}

async fn concurrent_posts(request: impl Fn() -> String) -> Vec<(StatusCode, Value)> {
    let app = app();
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            let body = request();
            tokio::spawn(async move { post(app, body).await })
        })
        .collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn validation_errors() {
    let (status, body) = post(app(), json!({"paid": "t", "income": "abc"}).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "income");

    let (status, body) = post(app(), json!({"salary": 1}).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "salary");

    let (status, _) = post(app(), json!({"years": 2.5}).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(app(), json!({"paid": 1}).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(app(), "[1, 2]").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = post(app(), json!({"paid": null, "income": null, "years": null}).to_string()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = post(app(), "{}").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let huge = format!(r#"{{"paid": "{}"}}"#, "x".repeat(4096));
    let (status, _) = post(app(), huge).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn model_metadata_is_stable() {
    let (status, first) = get(app(), "/v1/model").await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = get(app(), "/v1/model").await;
    assert_eq!(first, second);
    let doc: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(doc["attributes"].as_array().unwrap().len(), 3);
    assert_eq!(doc["attributes"][1]["kind"], "real");
    assert_eq!(doc["approve_label"], "+");
    assert!(doc["factor_count"].as_u64().unwrap() <= 7);
}

#[tokio::test]
async fn factor_listing_matches_cli_rendering() {
    let model = model();
    let (status, body) = get(app(), "/v1/factors").await;
    assert_eq!(status, StatusCode::OK);
    let doc: Value = serde_json::from_slice(&body).unwrap();
    let served: Vec<String> = doc["factors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["attributes"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect::<Vec<_>>().join("+"))
        .collect();
    // the CLI prints this table: a header, then `name  importance` rows
    let rendered: Vec<String> = model
        .factor_table()
        .render(model.dataset().schema(), None)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(served, rendered);

    let (_, body) = get(app(), "/v1/factors?top=1").await;
    let doc: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(doc["factors"].as_array().unwrap().len(), 1);
    assert_eq!(doc["factors"][0]["rank"], 1);

    for bad in ["0", "-3", "two"] {
        let (status, _) = get(app(), &format!("/v1/factors?top={bad}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "top={bad}");
    }
}

#[tokio::test]
async fn cors_allows_listed_origin_only() {
    let preflight = |origin: &str| {
        Request::builder()
            .method("OPTIONS")
            .uri("/v1/recommendations")
            .header(header::ORIGIN, origin)
            .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
            .body(Body::empty())
            .unwrap()
    };
    let response = app().oneshot(preflight("http://console.local")).await.unwrap();
    assert_eq!(response.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://console.local");
    let response = app().oneshot(preflight("http://elsewhere.example")).await.unwrap();
    assert!(response.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}
