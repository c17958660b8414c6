use assortify::demand::{fit_als, impute, AlsConfig};
use assortify::ingest::{demo_bundle, generate_synthetic, DatasetBundle, SyntheticConfig};
use assortify_service::{router, Service, SessionState};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn session(bundle: DatasetBundle) -> SessionState {
    let config = AlsConfig { rank: 2, ..AlsConfig::default() };
    let model = fit_als(&bundle.sales, &config).unwrap();
    let demand = impute(&model, &bundle.sales).unwrap();
    SessionState::new(bundle, demand).unwrap()
}

fn demo_app() -> Router {
    router(Service::loaded(session(demo_bundle())), false)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

async fn raw_post(app: &Router, uri: &str, body: &'static str) -> (StatusCode, Value) {
    let request = Request::builder().method("POST").uri(uri).body(Body::from(body)).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_reports_counts() {
    let app = demo_app();
    let (status, body, first) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["products"], 2);
    assert_eq!(body["stores"], 1);
    assert_eq!(body["status"], "ok");
    let (_, _, second) = call(&app, "GET", "/health", None).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn not_ready_until_installed() {
    let service = Service::pending();
    let app = router(service.clone(), false);
    let (status, body, _) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"]["kind"], "NotReady");
    assert!(service.install(session(demo_bundle())));
    assert!(!service.install(session(demo_bundle())));
    assert_eq!(call(&app, "GET", "/health", None).await.0, StatusCode::OK);
}

#[tokio::test]
async fn products_carry_higg_scores() {
    let app = demo_app();
    let (status, body, _) = call(&app, "GET", "/products?store=s1", None).await;
    assert_eq!(status, StatusCode::OK);
    let higg: Vec<f64> = body.as_array().unwrap().iter().map(|p| p["higg_score"].as_f64().unwrap()).collect();
    assert_eq!(higg, vec![98.0, 31.0]);
    assert_eq!(body[0]["demand"], 10.0);
    assert_eq!(body[0]["expected_revenue"], 200.0);

    let (status, all, _) = call(&app, "GET", "/products", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all.as_array().unwrap().len(), 2);
    assert!(all[0]["demand"].is_null());

    let (status, err, _) = call(&app, "GET", "/products?store=nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["kind"], "UnknownStore");
}

#[tokio::test]
async fn stores_listing() {
    let (status, body, _) = call(&demo_app(), "GET", "/stores", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([{ "id": "s1", "store_index": 0, "name": "Demo store", "region": null }]));
}

#[tokio::test]
async fn optimize_endpoints() {
    let app = demo_app();
    // Revenue: p1 = 20 * 10 = 200, p2 = 30 * 4 = 120.
    let (status, body, _) =
        call(&app, "POST", "/optimize", Some(json!({"store": "s1", "k": 1, "trade_off_lambda": 0.0}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["product_ids"], json!(["p1"]));
    assert_eq!(body["store_id"], "s1");

    let (_, body, _) = call(&app, "POST", "/optimize", Some(json!({"store_index": 0, "k": 1, "lambda": 1.0}))).await;
    assert_eq!(body["product_ids"], json!(["p2"]));
    assert_eq!(body["higg_score"], 31.0);

    for lambda in [0.0, 0.5, 1.0] {
        let req = json!({"store": "s1", "k": 1, "trade_off_lambda": lambda, "locked_in": ["p2"]});
        let (_, body, _) = call(&app, "POST", "/optimize", Some(req)).await;
        assert_eq!(body["product_ids"], json!(["p2"]));
    }
}

#[tokio::test]
async fn optimize_errors() {
    let app = demo_app();
    let conflict = json!({"store": "s1", "k": 1, "trade_off_lambda": 0.5, "locked_in": ["p1"], "locked_out": ["p1"]});
    let (status, body, _) = call(&app, "POST", "/optimize", Some(conflict)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidLocks");

    let too_many = json!({"store": "s1", "k": 2, "trade_off_lambda": 0.5, "locked_out": ["p1"]});
    let (status, body, _) = call(&app, "POST", "/optimize", Some(too_many)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["kind"], "InsufficientCandidates");

    let (status, body) = raw_post(&app, "/optimize", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidBody");

    let (status, body) = raw_post(&app, "/optimize", r#"{"store":"s1","k":1,"trade_off_lambda":0.5,"extra":1}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidBody");

    let bad_lambda = json!({"store": "s1", "k": 1, "trade_off_lambda": 1.5});
    let (status, body, _) = call(&app, "POST", "/optimize", Some(bad_lambda)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidRequest");

    let unknown = json!({"store": "s9", "k": 1, "trade_off_lambda": 0.5});
    let (status, body, _) = call(&app, "POST", "/optimize", Some(unknown)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "UnknownStore");

    let unknown_lock = json!({"store": "s1", "k": 1, "trade_off_lambda": 0.5, "locked_in": ["zz"]});
    let (status, body, _) = call(&app, "POST", "/optimize", Some(unknown_lock)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidLocks");
}

#[tokio::test]
async fn pareto_demo() {
    let app = demo_app();
    let (status, body, _) =
        call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 1, "lambda_grid": [0.0, 1.0]}))).await;
    assert_eq!(status, StatusCode::OK);
    let solutions = body["solutions"].as_array().unwrap();
    assert_eq!(solutions.len(), 2);
    assert_eq!(solutions[0]["fabric_composition"], json!({"cotton": 1.0}));
    assert_eq!(solutions[1]["fabric_composition"], json!({"viscose": 1.0}));
    assert!(solutions.iter().all(|s| s["dominated"] == false));

    // Both products chosen at every lambda collapse to one point.
    let (_, body, _) =
        call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 2, "lambda_grid": [0.0, 1.0]}))).await;
    assert_eq!(body["solutions"].as_array().unwrap().len(), 1);
    assert_eq!(body["solutions"][0]["fabric_composition"], json!({"cotton": 2.0 / 3.0, "viscose": 1.0 / 3.0}));
}

#[tokio::test]
async fn pareto_grid_limits() {
    let app = demo_app();
    let (status, body, _) = call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 1, "grid_points": 1002}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidRequest");
    let (status, _, _) = call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 1, "grid_points": 1001}))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body, _) = call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 1, "lambda_grid": [0.5, 0.2]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["kind"], "InvalidRequest");
    let (status, _, _) = call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 1}))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn pareto_locked_out_top_product() {
    let bundle = generate_synthetic(&SyntheticConfig { n_products: 60, n_stores: 2, ..SyntheticConfig::default() }).unwrap();
    let app = router(Service::loaded(session(bundle)), false);
    let (_, top, _) = call(&app, "POST", "/optimize", Some(json!({"store_index": 0, "k": 1, "trade_off_lambda": 0.0}))).await;
    let top_id = top["product_ids"][0].as_str().unwrap().to_string();
    let req = json!({"store_index": 0, "k": 5, "grid_points": 21, "locked_out": [top_id]});
    let (status, body, _) = call(&app, "POST", "/pareto", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    for s in body["solutions"].as_array().unwrap() {
        assert!(!s["product_ids"].as_array().unwrap().iter().any(|id| id == top_id.as_str()));
    }
}

#[tokio::test]
async fn histograms_three_peaks() {
    let bundle = generate_synthetic(&SyntheticConfig::three_peak(1600, 2, 5)).unwrap();
    let app = router(Service::loaded(session(bundle)), false);
    let (status, body, _) = call(&app, "GET", "/histograms", None).await;
    assert_eq!(status, StatusCode::OK);
    let higg = body["higg"].as_array().unwrap();
    assert_eq!(higg.len(), 20);
    assert_eq!(higg.iter().filter(|b| b["count"].as_u64().unwrap() > 0).count(), 3);
    let total: u64 = body["quality"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 1600);

    let (status, _, _) = call(&app, "GET", "/histograms?bins=0", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body, _) = call(&app, "GET", "/histograms?store=s02&bins=5", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["store_id"], "s02");
}

#[tokio::test]
async fn single_product_histogram() {
    let mut bundle = demo_bundle();
    let catalog = &bundle.catalog;
    bundle.catalog = assortify::Catalog::new(
        catalog.products()[..1].to_vec(),
        catalog.stores().to_vec(),
        catalog.fabric_table().clone(),
    );
    bundle.sales = assortify::demand::SalesMatrix::new(1, 1, vec![assortify::demand::Observation::new(0, 0, 3.0)]).unwrap();
    let app = router(Service::loaded(session(bundle)), false);
    let (_, body, _) = call(&app, "GET", "/histograms", None).await;
    assert_eq!(body["higg"].as_array().unwrap().len(), 1);
    assert_eq!(body["higg"][0]["count"], 1);
}

#[tokio::test]
async fn cors_flag_adds_headers() {
    let app = router(Service::loaded(session(demo_bundle())), true);
    let request = Request::builder()
        .uri("/health")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    assert!(response.headers().contains_key("access-control-allow-origin"));

    let plain = demo_app();
    let request = Request::builder().uri("/health").header("origin", "http://x").body(Body::empty()).unwrap();
    assert!(!plain.oneshot(request).await.unwrap().headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn responses_independent_of_request_order() {
    let app = demo_app();
    let req = json!({"store": "s1", "k": 1, "trade_off_lambda": 0.3});
    let (_, _, alone) = call(&demo_app(), "POST", "/optimize", Some(req.clone())).await;
    call(&app, "POST", "/optimize", Some(json!({"store": "s1", "k": 2, "trade_off_lambda": 0.9, "locked_in": ["p2"]}))).await;
    call(&app, "POST", "/pareto", Some(json!({"store": "s1", "k": 1}))).await;
    let (_, _, after) = call(&app, "POST", "/optimize", Some(req)).await;
    assert_eq!(alone, after);
}
