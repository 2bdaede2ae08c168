use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use crimegwr::experiment::{generate_city, BandwidthChoice, CitySpec};
use crimegwr::ingest::{build_model_rows, BuildOptions, WeatherSeries};
use crimegwr::risk::{ModelBundle, RiskEngine, RiskQuery};
use crimegwr_service::{router, AppState, RiskResponse};

fn bundle() -> &'static ModelBundle {
    static B: OnceLock<ModelBundle> = OnceLock::new();
    B.get_or_init(|| {
        let mut spec = CitySpec::rochester(5);
        spec.grid = 4;
        spec.first_year = 2016;
        spec.last_year = 2016;
        let city = generate_city(&spec).unwrap();
        let weather = WeatherSeries::new(city.weather.clone());
        let rows = build_model_rows(&city.incidents, &city.geounits, &weather, BuildOptions::default()).unwrap();
        ModelBundle::fit(&rows, &city.geounits, &weather, Some(2016), &BandwidthChoice::Fixed(5.0)).unwrap()
    })
}

fn loaded(heatmap_dir: Option<std::path::PathBuf>) -> AppState {
    let state = AppState::new(heatmap_dir);
    state.install(RiskEngine::new(bundle().clone()).unwrap());
    state
}

async fn get(state: AppState, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = router(state)
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(state: AppState, uri: &str) -> (StatusCode, Value) {
    let (s, b) = get(state, uri).await;
    (s, serde_json::from_slice(&b).unwrap())
}

#[tokio::test]
async fn health_before_and_after_load() {
    let state = AppState::new(None);
    let (s, v) = get_json(state.clone(), "/api/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "loading");

    let (s, _) = get(state.clone(), "/api/risk?lat=43.18&lon=-77.6&hour=3&month=1").await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);

    state.install(RiskEngine::new(bundle().clone()).unwrap());
    let (_, v) = get_json(state, "/api/health").await;
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model_version"], bundle().model_version.as_str());
    let locals = bundle().models.values().next().unwrap().locals().len();
    assert_eq!(v["locals_count"], locals as u64);
}

#[tokio::test]
async fn risk_response_fields_and_library_agreement() {
    let unit = &bundle().geounits.units[3];
    let (lat, lon) = (unit.centroid.lat(), unit.centroid.lon());
    let uri = format!("/api/risk?lat={lat}&lon={lon}&hour=14&month=7&temp_f=71.5");
    let (s, v) = get_json(loaded(None), &uri).await;
    assert_eq!(s, StatusCode::OK);
    for key in ["lat", "lon", "hour", "month", "temp_f", "probabilities", "raw", "geoid", "mode", "model_version"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let keys: Vec<&str> = v["probabilities"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["aggravated_assault", "burglary", "larceny", "motor_vehicle_theft", "murder", "robbery"]
    );
    assert_eq!(v["mode"], "geoid_average");
    assert_eq!(v["geoid"], unit.geoid.as_str());

    let served: RiskResponse = serde_json::from_value(v).unwrap();
    let q = RiskQuery::new(lat, lon, 14, 7, Some(71.5)).unwrap();
    let lib = RiskEngine::new(bundle().clone()).unwrap().assess(&q).unwrap();
    assert_eq!(served, RiskResponse::new(&q, lib));
}

#[tokio::test]
async fn invalid_fields_are_unprocessable() {
    for uri in [
        "/api/risk?lat=43.18&lon=-77.6&hour=24&month=1",
        "/api/risk?lat=43.18&lon=-77.6&hour=3&month=13",
        "/api/risk?lat=95&lon=-77.6&hour=3&month=1",
        "/api/risk?lat=43.18&lon=-77.6&hour=3",
        "/api/risk?lat=abc&lon=-77.6&hour=3&month=1",
        "/api/risk?lat=43.18&lon=-77.6&hour=3&month=1&temp_f=500",
    ] {
        let (s, v) = get_json(loaded(None), uri).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{uri}");
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn heatmap_lookup() {
    let dir = std::env::temp_dir().join(format!("crimegwr-heatmaps-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let body = r#"{"type":"FeatureCollection","features":[]}"#;
    std::fs::write(dir.join("burglary_2016.geojson"), body).unwrap();

    let (s, b) = get(loaded(Some(dir.clone())), "/api/heatmap/burglary/2016").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b, body.as_bytes());

    let (s, _) = get(loaded(Some(dir.clone())), "/api/heatmap/burglary/2099").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, v) = get_json(loaded(Some(dir.clone())), "/api/heatmap/arson/2016").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["allowed"].as_array().unwrap().len(), 6);
    assert!(v["allowed"].as_array().unwrap().iter().any(|a| a == "motor_vehicle_theft"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[tokio::test]
async fn identical_queries_identical_responses() {
    let state = loaded(None);
    let uri = "/api/risk?lat=43.2&lon=-77.62&hour=20&month=11";
    let a = get(state.clone(), uri).await;
    let b = get(state, uri).await;
    assert_eq!(a, b);
}
