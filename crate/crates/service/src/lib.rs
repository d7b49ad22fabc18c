//! Read-only HTTP API over the artifacts of a pipeline run, plus what-if
//! siting scenarios computed on request.
//!
//! Routes:
//! - `GET /v1/rollup?level=national|ba|state`
//! - `GET /v1/ba/{ba_id}`
//! - `GET /v1/geo/regions`
//! - `POST /v1/scenario`
//! - `GET /v1/health`

mod config;
mod error;
mod scenario;

pub use config::{ConfigError, ServiceConfig, ENV_ARTIFACTS, ENV_CORS_ORIGINS, ENV_PORT, ENV_UPTIME};
pub use error::ApiError;
pub use scenario::{run_scenario, Accounting, ScenarioFlag, ScenarioPlant, ScenarioRequest, ScenarioResponse};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dcfootprint::geo::regions_to_geojson;
use dcfootprint::pipeline::{sha256_hex, Artifacts};
use dcfootprint::report::RollupLevel;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

/// A response body with its entity tag.
#[derive(Debug, Clone)]
struct Cached {
    body: Vec<u8>,
    etag: String,
}

struct Loaded {
    artifacts: Artifacts,
    rollups: BTreeMap<RollupLevel, Cached>,
    ba: BTreeMap<String, Cached>,
    regions: Cached,
}

struct Inner {
    config: ServiceConfig,
    loaded: Result<Loaded, String>,
}

/// Shared immutable state. Cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("response serializes")
}

fn etag(content_hash: &str, resource: &str) -> String {
    let digest = sha256_hex(format!("{content_hash}\n{resource}").as_bytes());
    format!("\"{}\"", &digest[..32])
}

impl AppState {
    /// Load artifacts from `config.artifacts`. A load failure is kept and
    /// reported as 503 by the data routes.
    pub fn new(config: ServiceConfig) -> Self {
        let loaded = Artifacts::load(&config.artifacts).map_err(|e| e.to_string());
        match loaded {
            Ok(a) => AppState::from_artifacts(config, a),
            Err(e) => {
                log::error!("artifacts unavailable: {e}");
                AppState(Arc::new(Inner { config, loaded: Err(e) }))
            }
        }
    }

    pub fn from_artifacts(config: ServiceConfig, artifacts: Artifacts) -> Self {
        let hash = artifacts.content_hash.clone();
        let rollups = RollupLevel::ALL
            .into_iter()
            .map(|level| {
                let body = json_bytes(artifacts.rollups.get(level));
                (level, Cached { body, etag: etag(&hash, &format!("rollup/{level}")) })
            })
            .collect();
        let ba = artifacts
            .ba_details
            .iter()
            .map(|(id, d)| (id.clone(), Cached { body: json_bytes(d), etag: etag(&hash, &format!("ba/{id}")) }))
            .collect();
        let geo = regions_to_geojson(artifacts.regions.regions(), |r| {
            let mut m = Map::new();
            if let Some(d) = artifacts.ba_details.get(&r.ba_id) {
                m.insert("intensity_g_per_kwh".into(), json!(d.intensity_g_per_kwh));
                m.insert("energy_twh".into(), json!(d.energy_twh));
                m.insert("emissions_mt".into(), json!(d.emissions_mt));
                m.insert("n_data_centers".into(), json!(d.n_data_centers));
                m.insert("unattributable".into(), json!(d.unattributable));
            }
            m
        });
        let regions = Cached { body: json_bytes(&geo), etag: etag(&hash, "geo/regions") };
        AppState(Arc::new(Inner { config, loaded: Ok(Loaded { artifacts, rollups, ba, regions }) }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    fn loaded(&self) -> Result<&Loaded, ApiError> {
        self.0.loaded.as_ref().map_err(|e| ApiError::unavailable(e.clone()))
    }
}

fn cached_response(headers: &HeaderMap, cached: &Cached, content_type: &'static str) -> Response {
    let tag = HeaderValue::from_str(&cached.etag).expect("etag is ascii");
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == cached.etag || t.trim() == "*"));
    if matches {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, tag)]).into_response();
    }
    (
        StatusCode::OK,
        [(header::CONTENT_TYPE, HeaderValue::from_static(content_type)), (header::ETAG, tag)],
        cached.body.clone(),
    )
        .into_response()
}

#[derive(Deserialize)]
struct RollupQuery {
    level: Option<String>,
}

async fn rollup(State(state): State<AppState>, Query(q): Query<RollupQuery>, headers: HeaderMap) -> Response {
    let level = match q.level.as_deref().map(str::parse::<RollupLevel>) {
        Some(Ok(level)) => level,
        Some(Err(e)) => return ApiError::bad_request("invalid_level", e.to_string()).into_response(),
        None => return ApiError::bad_request("invalid_level", "query parameter `level` is required").into_response(),
    };
    match state.loaded() {
        Ok(l) => cached_response(&headers, &l.rollups[&level], "application/json"),
        Err(e) => e.into_response(),
    }
}

async fn ba_detail(State(state): State<AppState>, Path(ba_id): Path<String>, headers: HeaderMap) -> Response {
    let loaded = match state.loaded() {
        Ok(l) => l,
        Err(e) => return e.into_response(),
    };
    match loaded.ba.get(&ba_id) {
        Some(c) => cached_response(&headers, c, "application/json"),
        None => ApiError::new(StatusCode::NOT_FOUND, "unknown_ba", format!("no balancing authority {ba_id:?}"))
            .into_response(),
    }
}

async fn geo_regions(State(state): State<AppState>, headers: HeaderMap) -> Response {
    match state.loaded() {
        Ok(l) => cached_response(&headers, &l.regions, "application/geo+json"),
        Err(e) => e.into_response(),
    }
}

async fn scenario(State(state): State<AppState>, body: Result<Json<ScenarioRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(rej) => return ApiError::bad_request("malformed_request", rej.body_text()).into_response(),
    };
    let loaded = match state.loaded() {
        Ok(l) => l,
        Err(e) => return e.into_response(),
    };
    match run_scenario(&req, &loaded.artifacts, state.config()) {
        Ok(resp) => ([(header::CONTENT_TYPE, "application/json")], json_bytes(&resp)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn health(State(state): State<AppState>) -> Response {
    let body: Value = match &state.0.loaded {
        Ok(l) => json!({ "status": "ok", "content_hash": l.artifacts.content_hash }),
        Err(e) => json!({ "status": "degraded", "message": e }),
    };
    Json(body).into_response()
}

pub fn router(state: AppState) -> Router {
    let origins: Vec<HeaderValue> =
        state.config().cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    let app = Router::new()
        .route("/v1/rollup", get(rollup))
        .route("/v1/ba/{ba_id}", get(ba_detail))
        .route("/v1/geo/regions", get(geo_regions))
        .route("/v1/scenario", post(scenario))
        .route("/v1/health", get(health))
        .with_state(state);
    if origins.is_empty() {
        app
    } else {
        app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
                .expose_headers([header::ETAG]),
        )
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Bind, then serve until Ctrl-C.
pub async fn serve(state: AppState) -> Result<(), ServeError> {
    let addr = format!("{}:{}", state.config().bind, state.config().port);
    let listener =
        tokio::net::TcpListener::bind(&addr).await.map_err(|e| ServeError::Bind { addr: addr.clone(), source: e })?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
