//! HTTP/JSON risk-query service.
//!
//! Routes:
//! - `GET /api/risk?lat&lon&hour&month[&temp_f]`
//! - `GET /api/heatmap/{crime_type}/{year}` serves precomputed GeoJSON files
//!   named `{crime_type}_{year}.geojson` from the heat-map directory
//! - `GET /api/health`
//!
//! The loaded engine sits behind an `RwLock<Option<Arc<_>>>`. Handlers clone the
//! `Arc` and release the lock, so a reload swaps the model atomically while
//! in-flight requests finish on the version they started with.

mod config;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crimegwr::risk::{ModeUsed, ModelBundle, RiskEngine, RiskError, RiskQuery, RiskReport};
use crimegwr::CrimeType;

pub use config::{
    ServiceConfig, ENV_CLIMATOLOGY_PATH, ENV_GEOID_RADIUS_KM, ENV_HEATMAP_DIR, ENV_LISTEN, ENV_MODEL_PATH,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("climatology: {0}")]
    Climatology(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Twelve monthly means, January first, as a JSON array with `null` gaps.
pub fn parse_climatology(s: &str) -> Result<[Option<f64>; 12], ServiceError> {
    serde_json::from_str(s).map_err(|e| ServiceError::Climatology(e.to_string()))
}

/// Loads the bundle and applies the config's radius and climatology override.
pub fn load_engine(cfg: &ServiceConfig) -> Result<RiskEngine, ServiceError> {
    let path = cfg
        .model_path
        .as_deref()
        .ok_or_else(|| ServiceError::Config("model_path is not set".into()))?;
    let mut engine = RiskEngine::new(ModelBundle::load(path)?)?.with_geoid_radius(cfg.geoid_radius_km);
    if let Some(c) = &cfg.climatology_path {
        engine = engine.with_climatology(parse_climatology(&std::fs::read_to_string(c)?)?);
    }
    Ok(engine)
}

#[derive(Clone, Default)]
pub struct AppState {
    engine: Arc<RwLock<Option<Arc<RiskEngine>>>>,
    heatmap_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(heatmap_dir: Option<PathBuf>) -> Self {
        Self { engine: Arc::default(), heatmap_dir }
    }

    /// Installs or replaces the model.
    pub fn install(&self, engine: RiskEngine) {
        *self.engine.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<Arc<RiskEngine>> {
        self.engine.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskResponse {
    pub lat: f64,
    pub lon: f64,
    pub hour: u32,
    pub month: u32,
    /// Temperature actually used, from the query or climatology.
    pub temp_f: f64,
    pub probabilities: BTreeMap<CrimeType, f64>,
    pub raw: BTreeMap<CrimeType, f64>,
    pub geoid: Option<String>,
    pub mode: ModeUsed,
    pub model_version: String,
}

impl RiskResponse {
    pub fn new(q: &RiskQuery, r: RiskReport) -> Self {
        Self {
            lat: q.location.lat(),
            lon: q.location.lon(),
            hour: q.hour,
            month: q.month,
            temp_f: r.temp_f,
            probabilities: r.probabilities,
            raw: r.raw,
            geoid: r.geoid,
            mode: r.mode,
            model_version: r.model_version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_version: Option<String>,
    pub locals_count: Option<usize>,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

fn unprocessable(msg: impl Into<String>) -> Response {
    error(StatusCode::UNPROCESSABLE_ENTITY, msg)
}

fn required<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<T, String> {
    let v = params.get(key).ok_or_else(|| format!("missing parameter {key}"))?;
    v.trim().parse().map_err(|_| format!("invalid {key}: {v}"))
}

/// Parses the query string into a validated [`RiskQuery`]. Any error here is
/// reported as a 422.
pub fn parse_risk_params(params: &HashMap<String, String>) -> Result<RiskQuery, String> {
    let lat: f64 = required(params, "lat")?;
    let lon: f64 = required(params, "lon")?;
    let hour: u32 = required(params, "hour")?;
    let month: u32 = required(params, "month")?;
    let temp_f = match params.get("temp_f").map(|s| s.trim()) {
        None | Some("") => None,
        Some(_) => Some(required::<f64>(params, "temp_f")?),
    };
    RiskQuery::new(lat, lon, hour, month, temp_f).map_err(|e| e.to_string())
}

async fn handle_risk(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    let Some(engine) = state.engine() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "model loading");
    };
    let q = match parse_risk_params(&params) {
        Ok(q) => q,
        Err(msg) => return unprocessable(msg),
    };
    match engine.assess(&q) {
        Ok(r) => Json(RiskResponse::new(&q, r)).into_response(),
        Err(e @ (RiskError::InvalidQuery(_) | RiskError::OutsideSupport(_) | RiskError::NoClimatology(_))) => {
            unprocessable(e.to_string())
        }
        Err(e) => {
            tracing::error!(error = %e, "risk query failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

fn heatmap_file(dir: &Path, crime_type: CrimeType, year: i32) -> PathBuf {
    dir.join(format!("{}_{year}.geojson", crime_type.key()))
}

async fn handle_heatmap(State(state): State<AppState>, UrlPath((kind, year)): UrlPath<(String, String)>) -> Response {
    let allowed: Vec<&str> = CrimeType::ALL.iter().map(|t| t.key()).collect();
    let Some(crime_type) = CrimeType::ALL.into_iter().find(|t| t.key() == kind) else {
        return (
            StatusCode::NOT_FOUND,
            Json(json!({ "error": format!("unknown crime type {kind}"), "allowed": allowed })),
        )
            .into_response();
    };
    let Ok(year) = year.parse::<i32>() else {
        return error(StatusCode::NOT_FOUND, format!("invalid year {year}"));
    };
    let Some(dir) = &state.heatmap_dir else {
        return error(StatusCode::NOT_FOUND, "no heat-map directory configured");
    };
    match tokio::fs::read(heatmap_file(dir, crime_type, year)).await {
        Ok(body) => ([(header::CONTENT_TYPE, "application/geo+json")], body).into_response(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            error(StatusCode::NOT_FOUND, format!("no heat map for {} {year}", crime_type.key()))
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn handle_health(State(state): State<AppState>) -> Json<HealthResponse> {
    Json(match state.engine() {
        Some(e) => HealthResponse {
            status: "ok".into(),
            model_version: Some(e.model_version().to_string()),
            locals_count: Some(e.locals_count()),
        },
        None => HealthResponse { status: "loading".into(), model_version: None, locals_count: None },
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/risk", get(handle_risk))
        .route("/api/heatmap/{crime_type}/{year}", get(handle_heatmap))
        .route("/api/health", get(handle_health))
        .with_state(state)
}

/// Binds, starts serving immediately and loads the model in the background;
/// `/api/risk` answers 503 until the load finishes.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::new(cfg.heatmap_dir.clone());
    let listener = tokio::net::TcpListener::bind(&cfg.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match load_engine(&cfg) {
        Ok(engine) => {
            tracing::info!(model_version = engine.model_version(), "model loaded");
            loader.install(engine);
        }
        Err(e) => tracing::error!(error = %e, "model load failed"),
    });
    axum::serve(listener, router(state)).await?;
    Ok(())
}
