//! What-if siting for a single hypothetical facility.

use crate::error::ApiError;
use crate::ServiceConfig;
use dcfootprint::attribution::{
    carbon_intensity, consequential_emissions, energy_load, fuel_mix, split_load, totals, AttributionError, LoadParams,
};
use dcfootprint::geo::LonLat;
use dcfootprint::impute::FeatureVector;
use dcfootprint::pipeline::Artifacts;
use dcfootprint::record::{AssignmentFlag, CapacityProvenance, DcType, FuelCategory};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const SCENARIO_ID: &str = "scenario";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    #[default]
    Attributional,
    Consequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default)]
    pub power_capacity_mw: Option<f64>,
    #[serde(default)]
    pub square_footage: Option<f64>,
    #[serde(default)]
    pub dc_type: Option<String>,
    #[serde(default)]
    pub climate_type: Option<String>,
    #[serde(default)]
    pub uptime: Option<f64>,
    #[serde(default)]
    pub accounting: Accounting,
    #[serde(default)]
    pub top_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPlant {
    pub plant_id: String,
    pub fuel_category: FuelCategory,
    pub load_mwh: f64,
    pub emissions_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioFlag {
    Fallback,
    Ambiguous,
    Unattributable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResponse {
    pub ba_id: String,
    pub accounting: Accounting,
    pub capacity_mw: f64,
    pub capacity_provenance: CapacityProvenance,
    pub uptime: f64,
    pub energy_mwh: f64,
    /// `None` when the authority is unattributable.
    pub emissions_g: Option<f64>,
    pub intensity_g_per_kwh: Option<f64>,
    /// Load-weighted; empty under consequential accounting.
    pub fuel_mix: BTreeMap<FuelCategory, f64>,
    /// Largest plant shares first; empty under consequential accounting.
    pub plants: Vec<ScenarioPlant>,
    pub flags: Vec<ScenarioFlag>,
}

fn invalid(message: impl Into<String>) -> ApiError {
    ApiError::unprocessable("invalid_request", message)
}

fn check(req: &ScenarioRequest) -> Result<(), ApiError> {
    if !(-90.0..=90.0).contains(&req.latitude) || !(-180.0..=180.0).contains(&req.longitude) {
        return Err(invalid("latitude must lie in [-90, 90] and longitude in [-180, 180]"));
    }
    let features = [req.square_footage.is_some(), req.dc_type.is_some(), req.climate_type.is_some()];
    match (req.power_capacity_mw, features) {
        (Some(_), [false, false, false]) => {}
        (None, [true, true, true]) => {}
        (Some(_), _) => {
            return Err(invalid("give either power_capacity_mw or square_footage, dc_type and climate_type, not both"))
        }
        (None, _) => return Err(invalid("give power_capacity_mw, or all of square_footage, dc_type and climate_type")),
    }
    if let Some(c) = req.power_capacity_mw {
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid("power_capacity_mw must be positive"));
        }
    }
    if let Some(s) = req.square_footage {
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid("square_footage must be positive"));
        }
    }
    if let Some(u) = req.uptime {
        if !(u > 0.0 && u <= 1.0) {
            return Err(invalid("uptime must lie in (0, 1]"));
        }
    }
    Ok(())
}

/// Geo-assign, optionally impute, then attribute one facility. Reads the
/// loaded artifacts only; nothing is stored.
pub fn run_scenario(
    req: &ScenarioRequest,
    artifacts: &Artifacts,
    config: &ServiceConfig,
) -> Result<ScenarioResponse, ApiError> {
    check(req)?;
    let assignment = artifacts.regions.assign(LonLat::new(req.longitude, req.latitude));
    let mut flags = Vec::new();
    match assignment.flag {
        Some(AssignmentFlag::Fallback) if !config.allow_fallback => {
            return Err(ApiError::unprocessable(
                "outside_regions",
                "point lies outside every balancing authority and fallback is disabled",
            ));
        }
        Some(AssignmentFlag::Fallback) => flags.push(ScenarioFlag::Fallback),
        Some(AssignmentFlag::Ambiguous) => flags.push(ScenarioFlag::Ambiguous),
        None => {}
    }
    let ba_id = assignment.ba_id;

    let (capacity_mw, capacity_provenance) = match req.power_capacity_mw {
        Some(c) => (c, CapacityProvenance::Reported),
        None => {
            let model = artifacts.model.as_ref().ok_or_else(|| {
                ApiError::unprocessable("imputation_unavailable", "no capacity model was trained for this run")
            })?;
            let features = FeatureVector {
                square_footage: req.square_footage,
                climate_type: req.climate_type.clone().unwrap_or_default(),
                ba_id: ba_id.clone(),
                dc_type: DcType::from_label(req.dc_type.as_deref().unwrap_or_default()),
            };
            (model.predict(&features), CapacityProvenance::Imputed)
        }
    };

    let uptime = req.uptime.unwrap_or(config.default_uptime);
    let params = LoadParams::new(uptime, config.year).map_err(|e| invalid(e.to_string()))?;
    let energy_mwh = energy_load(capacity_mw, &params).map_err(|e| invalid(e.to_string()))?;

    let mut response = ScenarioResponse {
        ba_id: ba_id.clone(),
        accounting: req.accounting,
        capacity_mw,
        capacity_provenance,
        uptime,
        energy_mwh,
        emissions_g: None,
        intensity_g_per_kwh: None,
        fuel_mix: BTreeMap::new(),
        plants: Vec::new(),
        flags,
    };

    match req.accounting {
        Accounting::Consequential => {
            let rate = artifacts.marginal_rates.as_ref().and_then(|r| r.get(&ba_id)).ok_or_else(|| {
                ApiError::unprocessable("missing_marginal_rate", format!("no marginal emission rate for {ba_id}"))
            })?;
            response.emissions_g = Some(consequential_emissions(energy_mwh, rate));
            response.intensity_g_per_kwh = Some(rate.rate_g_per_kwh);
        }
        Accounting::Attributional => match artifacts.grid.coefficients(&ba_id) {
            Ok(coeffs) => {
                let rows = split_load(SCENARIO_ID, energy_mwh, coeffs, &artifacts.grid).map_err(|e| {
                    ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
                })?;
                let (load, emissions) = totals(&rows);
                response.emissions_g = Some(emissions);
                response.intensity_g_per_kwh = carbon_intensity(emissions, load);
                response.fuel_mix = fuel_mix(&rows);
                let mut plants: Vec<ScenarioPlant> = rows
                    .into_iter()
                    .map(|r| ScenarioPlant {
                        plant_id: r.plant_id,
                        fuel_category: r.fuel_category,
                        load_mwh: r.load_mwh,
                        emissions_g: r.emissions_g,
                    })
                    .collect();
                plants.sort_by(|a, b| b.load_mwh.total_cmp(&a.load_mwh).then_with(|| a.plant_id.cmp(&b.plant_id)));
                plants.truncate(req.top_n.unwrap_or(config.top_n));
                response.plants = plants;
            }
            Err(AttributionError::Unattributable(_)) => response.flags.push(ScenarioFlag::Unattributable),
            Err(e) => {
                return Err(ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
            }
        },
    }
    Ok(response)
}
