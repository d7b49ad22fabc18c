use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use dcfootprint::impute::FeatureVector;
use dcfootprint::pipeline::{self, Artifacts, Job, Overrides};
use dcfootprint::record::DcType;
use dcfootprint::report::{export, ExportFormat, RollupReport};
use dcfootprint_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use tower::ServiceExt;

// SOLO: one gas plant at 500 g/kWh. PJM: three plants. EMPTY: no plants.
const PJM_PLANTS: [(f64, f64); 3] = [(4.0e6, 900.0), (3.0e6, 400.0), (1.0e6, 0.0)];

fn square(id: &str, x0: f64) -> Value {
    json!({
        "type": "Feature",
        "properties": { "ba_id": id, "name": format!("{id} region") },
        "geometry": { "type": "Polygon", "coordinates": [[[x0, 0.0], [x0 + 1.0, 0.0], [x0 + 1.0, 1.0], [x0, 1.0], [x0, 0.0]]] }
    })
}

fn write_fixture(dir: &Path) -> PathBuf {
    let regions = json!({ "type": "FeatureCollection", "features": [square("SOLO", 0.0), square("PJM", 1.0), square("EMPTY", 2.0)] });
    std::fs::write(dir.join("regions.geojson"), regions.to_string()).unwrap();

    let mut plants = String::from("plant_id,latitude,longitude,ba_id,fuel_category,annual_net_generation_mwh,emission_rate,emission_rate_unit,nameplate_capacity_mw\n");
    writeln!(plants, "S1,0.5,0.5,,NG,2000000,500,g_per_kwh,300").unwrap();
    for (i, (gen, rate)) in PJM_PLANTS.iter().enumerate() {
        let fuel = ["COAL", "GAS", "NUC"][i];
        writeln!(plants, "J{i},0.5,1.{},PJM,{fuel},{gen},{rate},g_per_kwh,500", i + 2).unwrap();
    }
    std::fs::write(dir.join("plants.csv"), plants).unwrap();

    let mut dcs = String::from("id,provider,address,state,latitude,longitude,square_footage,sqft_source,dc_type,climate_type,power_capacity_mw\n");
    for i in 0..36 {
        let x = (i % 3) as f64 + 0.1 + 0.02 * (i / 3) as f64;
        let y = 0.1 + 0.02 * (i / 3) as f64;
        let sqft = 20_000.0 + 5_000.0 * i as f64;
        let kind = if i % 4 == 0 { "hyperscale" } else { "colocation" };
        let mw = if i % 6 == 5 { String::new() } else { format!("{}", sqft * 92.0 / 1e6) };
        let state = ["VA", "TX", "OR"][i % 3];
        writeln!(dcs, "d{i:02},prov,addr,{state},{y},{x},{sqft},baxtel,{kind},mixed-humid,{mw}").unwrap();
    }
    std::fs::write(dir.join("dcs.csv"), dcs).unwrap();
    std::fs::write(dir.join("rates.csv"), "ba_id,rate_g_per_kwh\nSOLO,400\nPJM,650\n").unwrap();

    let config = r#"
out_dir = "out"
[inputs]
data_centers = [{ path = "dcs.csv", source = "baxtel" }]
plants = "plants.csv"
regions = "regions.geojson"
marginal_rates = "rates.csv"
[gbrt]
n_trees = 30
min_samples_leaf = 2
"#;
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

struct Fixture {
    _dir: tempfile::TempDir,
    out: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let job = Job::from_file(&config, Overrides::default()).unwrap();
    pipeline::run_all(&job).unwrap();
    Fixture { out: job.out_dir.clone(), _dir: dir }
}

fn app(out: &Path, tweak: impl FnOnce(&mut ServiceConfig)) -> Router {
    let mut cfg = ServiceConfig { artifacts: out.to_path_buf(), ..ServiceConfig::default() };
    tweak(&mut cfg);
    router(AppState::new(cfg))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/v1/scenario")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, _, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[tokio::test]
async fn rollup_levels_and_etags() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let (status, headers, body) = get(&app, "/v1/rollup?level=national").await;
    assert_eq!(status, StatusCode::OK);
    let report: RollupReport = serde_json::from_slice(&body).unwrap();
    assert_eq!(report.rows.len(), 1);
    // the CLI export is the same report at its declared precision
    let cli_csv = std::fs::read(f.out.join("rollup_national.csv")).unwrap();
    assert_eq!(export(&report, ExportFormat::Csv), cli_csv);

    let etag = headers[header::ETAG].to_str().unwrap().to_string();
    let (_, again, body2) = get(&app, "/v1/rollup?level=national").await;
    assert_eq!(again[header::ETAG], etag.as_str());
    assert_eq!(body, body2);

    let req =
        Request::get("/v1/rollup?level=national").header(header::IF_NONE_MATCH, &etag).body(Body::empty()).unwrap();
    let (status, _, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::NOT_MODIFIED);
    assert!(body.is_empty());

    for level in ["ba", "state"] {
        let (status, _, _) = get(&app, &format!("/v1/rollup?level={level}")).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, _, body) = get(&app, "/v1/rollup?level=bogus").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["code"], "invalid_level");
    assert!(err["message"].as_str().unwrap().contains("bogus"));
}

#[tokio::test]
async fn missing_artifacts_give_503() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), |_| {});
    let (status, _, body) = get(&app, "/v1/rollup?level=national").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["code"], "artifacts_unavailable");
    let (status, _) = post(&app, json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": 1.0})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _, _) = get(&app, "/v1/health").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn ba_detail_matches_oracle_and_rollup() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let (status, _, body) = get(&app, "/v1/ba/PJM").await;
    assert_eq!(status, StatusCode::OK);
    let pjm: Value = serde_json::from_slice(&body).unwrap();
    // every PJM facility sees the same split, so intensity is the generation-weighted rate
    let total_gen: f64 = PJM_PLANTS.iter().map(|p| p.0).sum();
    let oracle = PJM_PLANTS.iter().map(|p| p.0 * p.1).sum::<f64>() / total_gen;
    assert!(close(pjm["intensity_g_per_kwh"].as_f64().unwrap(), oracle, 1e-12));
    assert_eq!(pjm["plants"].as_array().unwrap().len(), 3);

    let (_, _, body) = get(&app, "/v1/rollup?level=ba").await;
    let ba: RollupReport = serde_json::from_slice(&body).unwrap();
    let row = ba.rows.iter().find(|r| r.key == "PJM").unwrap();
    assert_eq!(pjm["emissions_mt"].as_f64().unwrap(), row.emissions_mt);
    assert_eq!(pjm["energy_twh"].as_f64().unwrap(), row.energy_twh);
    assert_eq!(pjm["n_data_centers"].as_u64().unwrap() as usize, row.n_data_centers);

    let (_, _, body) = get(&app, "/v1/ba/SOLO").await;
    let solo: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(solo["fuel_mix"], json!({ "natural_gas": 1.0 }));
    assert_eq!(solo["intensity_g_per_kwh"], 500.0);

    let (_, _, body) = get(&app, "/v1/ba/EMPTY").await;
    let empty: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(empty["unattributable"], true);
    assert!(empty["intensity_g_per_kwh"].is_null());

    let (status, _, body) = get(&app, "/v1/ba/NOPE").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["code"], "unknown_ba");
}

#[tokio::test]
async fn geo_regions_agree_with_ba_routes() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let (status, headers, body) = get(&app, "/v1/geo/regions").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "application/geo+json");
    let geo: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
    let features = geo["features"].as_array().unwrap();
    assert_eq!(features.len(), 3);
    for feat in features {
        assert_eq!(feat["type"], "Feature");
        assert_eq!(feat["geometry"]["type"], "Polygon");
        let ring = feat["geometry"]["coordinates"][0].as_array().unwrap();
        assert_eq!(ring.first(), ring.last());
        let props = &feat["properties"];
        let id = props["ba_id"].as_str().unwrap();
        let (_, _, body) = get(&app, &format!("/v1/ba/{id}")).await;
        let detail: Value = serde_json::from_slice(&body).unwrap();
        for key in ["intensity_g_per_kwh", "energy_twh", "emissions_mt", "n_data_centers"] {
            assert_eq!(props[key], detail[key], "{id}.{key}");
        }
    }
}

#[tokio::test]
async fn scenario_chain_arithmetic() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let req = json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": 1.0, "uptime": 0.75});
    let (status, body) = post(&app, req.clone()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["ba_id"], "SOLO");
    assert_eq!(body["energy_mwh"], 6570.0);
    assert!(close(body["emissions_g"].as_f64().unwrap(), 3.285e9, 1e-12));
    assert_eq!(body["intensity_g_per_kwh"], 500.0);
    assert_eq!(body["capacity_provenance"], "reported");
    assert_eq!(body["plants"].as_array().unwrap().len(), 1);
    assert_eq!(body["flags"], json!([]));

    // pure: the same request gives the same bytes
    let (_, again) = post(&app, req).await;
    assert_eq!(body, again);

    let (status, body) =
        post(&app, json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": 1.0, "accounting": "consequential"}))
            .await;
    assert_eq!(status, StatusCode::OK);
    assert!(close(body["emissions_g"].as_f64().unwrap(), 2.628e9, 1e-12));

    // default uptime comes from the service config
    let app_half = self::app(&f.out, |c| c.default_uptime = 0.5);
    let (_, body) = post(&app_half, json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": 1.0})).await;
    assert_eq!(body["energy_mwh"], 4380.0);
}

#[tokio::test]
async fn scenario_imputes_from_footage() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let (status, body) = post(
        &app,
        json!({"latitude": 0.5, "longitude": 1.5, "square_footage": 100000.0, "dc_type": "hyperscale", "climate_type": "mixed-humid"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["ba_id"], "PJM");
    assert_eq!(body["capacity_provenance"], "imputed");
    let model = Artifacts::load(&f.out).unwrap().model.unwrap();
    let expected = model.predict(&FeatureVector {
        square_footage: Some(100000.0),
        climate_type: "mixed-humid".into(),
        ba_id: "PJM".into(),
        dc_type: DcType::Hyperscale,
    });
    assert_eq!(body["capacity_mw"].as_f64().unwrap(), expected);
}

#[tokio::test]
async fn scenario_errors() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let cases = [
        json!({"latitude": 0.5, "longitude": 0.5}),
        json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": 1.0, "square_footage": 10.0}),
        json!({"latitude": 0.5, "longitude": 0.5, "square_footage": 10.0}),
        json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": -1.0}),
        json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": 1.0, "uptime": 1.5}),
        json!({"latitude": 95.0, "longitude": 0.5, "power_capacity_mw": 1.0}),
    ];
    for c in cases {
        let (status, body) = post(&app, c.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{c}");
        assert_eq!(body["code"], "invalid_request");
    }

    // EMPTY has no marginal rate
    let (status, body) =
        post(&app, json!({"latitude": 0.5, "longitude": 2.5, "power_capacity_mw": 1.0, "accounting": "consequential"}))
            .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "missing_marginal_rate");

    // attributional in EMPTY: energy but no emissions
    let (status, body) = post(&app, json!({"latitude": 0.5, "longitude": 2.5, "power_capacity_mw": 1.0})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["flags"], json!(["unattributable"]));
    assert!(body["emissions_g"].is_null());

    let outside = json!({"latitude": 5.0, "longitude": 0.5, "power_capacity_mw": 1.0});
    let (status, body) = post(&app, outside.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["flags"], json!(["fallback"]));
    let strict = self::app(&f.out, |c| c.allow_fallback = false);
    let (status, body) = post(&strict, outside).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "outside_regions");

    let req =
        Request::post("/v1/scenario").header(header::CONTENT_TYPE, "application/json").body(Body::from("{")).unwrap();
    let (status, _, body) = send(&app, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["code"], "malformed_request");
}

#[tokio::test]
async fn cors_allowlist() {
    let f = fixture();
    let app = app(&f.out, |c| c.cors_origins = vec!["http://ui.example".into()]);
    let req = Request::get("/v1/rollup?level=national")
        .header(header::ORIGIN, "http://ui.example")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = send(&app, req).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://ui.example");
    let req = Request::get("/v1/rollup?level=national")
        .header(header::ORIGIN, "http://evil.example")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = send(&app, req).await;
    assert!(headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}

#[tokio::test]
async fn concurrent_scenarios_are_independent() {
    let f = fixture();
    let app = app(&f.out, |_| {});
    let mut handles = Vec::new();
    for i in 1..=16 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let (_, body) = post(&app, json!({"latitude": 0.5, "longitude": 0.5, "power_capacity_mw": i as f64})).await;
            (i, body["energy_mwh"].as_f64().unwrap())
        }));
    }
    for h in handles {
        let (i, e) = h.await.unwrap();
        assert_eq!(e, i as f64 * 6570.0);
    }
}
