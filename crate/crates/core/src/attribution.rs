//! Energy loads, generation-weighted plant coefficients, attributed loads and
//! emissions, carbon intensities, fuel mixes and the marginal-rate alternative.
//!
//! Units: capacity in MW, energy in MWh, emissions in grams CO2e, rates and
//! intensities in g/kWh.

use crate::numeric::{self, CompensatedSum};
use crate::record::{DataCenterRecord, FuelCategory, FuelGroup, PowerPlantRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use thiserror::Error;

pub const HOURS_PER_YEAR: f64 = 8760.0;
pub const DEFAULT_UPTIME: f64 = 0.75;
/// Plant inventory year the generation and emission rates come from.
pub const DEFAULT_INVENTORY_YEAR: i32 = 2022;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttributionError {
    #[error("uptime must lie in (0, 1], got {0}")]
    InvalidUptime(f64),
    #[error("power capacity must be positive, got {0} MW")]
    NonPositiveCapacity(f64),
    #[error("data center {0} has no power capacity")]
    MissingCapacity(String),
    #[error("data center {0} has no balancing authority")]
    MissingBa(String),
    #[error("balancing authority {0} has no eligible generation and is unattributable")]
    Unattributable(String),
    #[error("data center is in {dc_ba} but coefficients are for {coeff_ba}")]
    BaMismatch { dc_ba: String, coeff_ba: String },
    #[error("plant {0} missing from the plant index")]
    UnknownPlant(String),
    #[error("marginal rates: {0}")]
    MarginalRates(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadParams {
    pub uptime: f64,
    pub hours_per_year: f64,
    pub year: i32,
}

impl LoadParams {
    pub fn new(uptime: f64, year: i32) -> Result<Self, AttributionError> {
        check_uptime(uptime)?;
        Ok(LoadParams { uptime, hours_per_year: HOURS_PER_YEAR, year })
    }
}

impl Default for LoadParams {
    fn default() -> Self {
        LoadParams { uptime: DEFAULT_UPTIME, hours_per_year: HOURS_PER_YEAR, year: DEFAULT_INVENTORY_YEAR }
    }
}

fn check_uptime(uptime: f64) -> Result<(), AttributionError> {
    if uptime > 0.0 && uptime <= 1.0 {
        Ok(())
    } else {
        Err(AttributionError::InvalidUptime(uptime))
    }
}

/// Annual energy in MWh: capacity · hours per year · uptime.
pub fn energy_load(capacity_mw: f64, params: &LoadParams) -> Result<f64, AttributionError> {
    check_uptime(params.uptime)?;
    if !(capacity_mw > 0.0) || !capacity_mw.is_finite() {
        return Err(AttributionError::NonPositiveCapacity(capacity_mw));
    }
    Ok(capacity_mw * params.hours_per_year * params.uptime)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantShare {
    pub plant_id: String,
    pub coefficient: f64,
}

/// Each eligible plant's share of its balancing authority's annual net generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgwCoefficients {
    pub ba_id: String,
    /// Sorted by plant id.
    pub shares: Vec<PlantShare>,
    pub pool_generation_mwh: f64,
}

impl EgwCoefficients {
    pub fn get(&self, plant_id: &str) -> Option<f64> {
        self.shares.binary_search_by(|s| s.plant_id.as_str().cmp(plant_id)).ok().map(|i| self.shares[i].coefficient)
    }
}

/// Generation-weighted coefficients for one balancing authority's plants.
/// Plants with non-positive generation are left out of the pool.
pub fn egw_coefficients<'a>(
    ba_id: &str,
    plants: impl IntoIterator<Item = &'a PowerPlantRecord>,
) -> Result<EgwCoefficients, AttributionError> {
    let mut pool: Vec<&PowerPlantRecord> = plants.into_iter().filter(|p| p.annual_net_generation_mwh > 0.0).collect();
    pool.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));
    let total = numeric::sum(pool.iter().map(|p| p.annual_net_generation_mwh));
    if pool.is_empty() || !(total > 0.0) {
        return Err(AttributionError::Unattributable(ba_id.to_string()));
    }
    let shares = pool
        .iter()
        .map(|p| PlantShare { plant_id: p.plant_id.clone(), coefficient: p.annual_net_generation_mwh / total })
        .collect();
    Ok(EgwCoefficients { ba_id: ba_id.to_string(), shares, pool_generation_mwh: total })
}

/// Plants indexed by id and grouped by balancing authority, with the
/// coefficients of every authority precomputed.
#[derive(Debug, Clone)]
pub struct Grid {
    plants: HashMap<String, PowerPlantRecord>,
    pools: BTreeMap<String, Result<EgwCoefficients, AttributionError>>,
}

impl Grid {
    /// Build pools from plants that carry a `ba_id`. `known_bas` adds
    /// authorities that have no plants at all, so they show up as unattributable.
    pub fn new(plants: &[PowerPlantRecord], known_bas: impl IntoIterator<Item = String>) -> Self {
        let mut by_ba: BTreeMap<String, Vec<&PowerPlantRecord>> = BTreeMap::new();
        for ba in known_bas {
            by_ba.entry(ba).or_default();
        }
        for p in plants {
            if let Some(ba) = &p.ba_id {
                by_ba.entry(ba.clone()).or_default().push(p);
            }
        }
        let pools = by_ba
            .into_iter()
            .map(|(ba, members)| {
                let coeffs = egw_coefficients(&ba, members.iter().copied());
                (ba, coeffs)
            })
            .collect();
        let plants = plants.iter().map(|p| (p.plant_id.clone(), p.clone())).collect();
        Grid { plants, pools }
    }

    pub fn plant(&self, plant_id: &str) -> Option<&PowerPlantRecord> {
        self.plants.get(plant_id)
    }

    /// Coefficients for a BA; `Unattributable` when its pool is empty or unknown.
    pub fn coefficients(&self, ba_id: &str) -> Result<&EgwCoefficients, AttributionError> {
        match self.pools.get(ba_id) {
            Some(Ok(c)) => Ok(c),
            _ => Err(AttributionError::Unattributable(ba_id.to_string())),
        }
    }

    pub fn ba_ids(&self) -> impl Iterator<Item = &str> {
        self.pools.keys().map(String::as_str)
    }

    pub fn unattributable_bas(&self) -> Vec<String> {
        self.pools.iter().filter(|(_, c)| c.is_err()).map(|(ba, _)| ba.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub dc_id: String,
    pub plant_id: String,
    pub ba_id: String,
    pub fuel_category: FuelCategory,
    pub load_mwh: f64,
    pub emissions_g: f64,
}

fn facility_energy(dc: &DataCenterRecord, params: &LoadParams) -> Result<f64, AttributionError> {
    let capacity = dc.power_capacity_mw.ok_or_else(|| AttributionError::MissingCapacity(dc.id.clone()))?;
    let params = LoadParams { uptime: dc.uptime.unwrap_or(params.uptime), ..*params };
    energy_load(capacity, &params)
}

/// Split one facility's annual load across its authority's plants and
/// compute the emissions of each share.
pub fn attribute_dc(
    dc: &DataCenterRecord,
    coeffs: &EgwCoefficients,
    grid: &Grid,
    params: &LoadParams,
) -> Result<Vec<AttributionResult>, AttributionError> {
    let dc_ba = dc.ba_id.as_deref().ok_or_else(|| AttributionError::MissingBa(dc.id.clone()))?;
    if dc_ba != coeffs.ba_id {
        return Err(AttributionError::BaMismatch { dc_ba: dc_ba.to_string(), coeff_ba: coeffs.ba_id.clone() });
    }
    let energy = facility_energy(dc, params)?;
    split_load(&dc.id, energy, coeffs, grid)
}

/// Apportion `energy_mwh` across the pool in `coeffs`.
pub fn split_load(
    dc_id: &str,
    energy_mwh: f64,
    coeffs: &EgwCoefficients,
    grid: &Grid,
) -> Result<Vec<AttributionResult>, AttributionError> {
    coeffs
        .shares
        .iter()
        .map(|share| {
            let plant =
                grid.plant(&share.plant_id).ok_or_else(|| AttributionError::UnknownPlant(share.plant_id.clone()))?;
            let load_mwh = share.coefficient * energy_mwh;
            Ok(AttributionResult {
                dc_id: dc_id.to_string(),
                plant_id: share.plant_id.clone(),
                ba_id: coeffs.ba_id.clone(),
                fuel_category: plant.fuel_category,
                load_mwh,
                emissions_g: load_mwh * 1000.0 * plant.emission_rate_g_per_kwh,
            })
        })
        .collect()
}

/// Grams per kWh; `None` for zero load.
pub fn carbon_intensity(emissions_g: f64, load_mwh: f64) -> Option<f64> {
    if load_mwh > 0.0 {
        Some(emissions_g / (load_mwh * 1000.0))
    } else {
        None
    }
}

/// Total (load MWh, emissions g) with compensated summation.
pub fn totals<'a>(results: impl IntoIterator<Item = &'a AttributionResult>) -> (f64, f64) {
    let mut load = CompensatedSum::new();
    let mut emissions = CompensatedSum::new();
    for r in results {
        load.add(r.load_mwh);
        emissions.add(r.emissions_g);
    }
    (load.value(), emissions.value())
}

/// Intensity over the results of one balancing authority.
pub fn ba_carbon_intensity<'a>(results: impl IntoIterator<Item = &'a AttributionResult>) -> Option<f64> {
    let (load, emissions) = totals(results);
    carbon_intensity(emissions, load)
}

/// Load-weighted intensity over every attributed pair.
pub fn weighted_average_intensity<'a>(results: impl IntoIterator<Item = &'a AttributionResult>) -> Option<f64> {
    ba_carbon_intensity(results)
}

/// Share of attributed load per fuel category. Empty when there is no load.
pub fn fuel_mix<'a>(results: impl IntoIterator<Item = &'a AttributionResult>) -> BTreeMap<FuelCategory, f64> {
    let mut by_fuel: BTreeMap<FuelCategory, CompensatedSum> = BTreeMap::new();
    for r in results {
        by_fuel.entry(r.fuel_category).or_default().add(r.load_mwh);
    }
    let total = numeric::sum(by_fuel.values().map(CompensatedSum::value));
    if !(total > 0.0) {
        return BTreeMap::new();
    }
    by_fuel.into_iter().map(|(fuel, load)| (fuel, load.value() / total)).collect()
}

/// Collapse a fuel mix into fossil / nuclear / renewable / other shares.
pub fn fuel_groups(mix: &BTreeMap<FuelCategory, f64>) -> BTreeMap<FuelGroup, f64> {
    let mut groups = BTreeMap::new();
    for (fuel, share) in mix {
        *groups.entry(fuel.group()).or_insert(0.0) += share;
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRate {
    pub ba_id: String,
    pub rate_g_per_kwh: f64,
}

/// Emissions caused by `load_mwh` at a marginal rate, in grams.
pub fn consequential_emissions(load_mwh: f64, rate: &MarginalRate) -> f64 {
    load_mwh * 1000.0 * rate.rate_g_per_kwh
}

/// Read a `ba_id,rate_g_per_kwh` CSV of externally supplied marginal rates.
pub fn parse_marginal_rates<R: Read>(reader: R) -> Result<BTreeMap<String, MarginalRate>, AttributionError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rates = BTreeMap::new();
    for (i, row) in rdr.deserialize::<MarginalRate>().enumerate() {
        let rate = row.map_err(|e| AttributionError::MarginalRates(format!("row {}: {e}", i + 2)))?;
        if !(rate.rate_g_per_kwh >= 0.0) || !rate.rate_g_per_kwh.is_finite() {
            return Err(AttributionError::MarginalRates(format!("{}: rate must be non-negative", rate.ba_id)));
        }
        if rates.insert(rate.ba_id.clone(), rate).is_some() {
            return Err(AttributionError::MarginalRates(format!("row {}: duplicate ba_id", i + 2)));
        }
    }
    Ok(rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityStatus {
    Attributed,
    /// Energy counted, emissions not attributable (no BA or empty pool).
    Unattributable,
    /// No capacity, so no energy either.
    NoCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityEnergy {
    pub dc_id: String,
    pub state: String,
    pub ba_id: Option<String>,
    pub capacity_mw: Option<f64>,
    pub uptime: f64,
    pub energy_mwh: Option<f64>,
    pub status: FacilityStatus,
    pub reason: Option<String>,
}

/// Output of [`attribute_all`]; facilities and results are sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRun {
    pub year: i32,
    pub default_uptime: f64,
    pub facilities: Vec<FacilityEnergy>,
    pub results: Vec<AttributionResult>,
}

impl AttributionRun {
    pub fn unattributable(&self) -> impl Iterator<Item = &FacilityEnergy> {
        self.facilities.iter().filter(|f| f.status != FacilityStatus::Attributed)
    }

    /// Total energy of every facility with a capacity, attributed or not.
    pub fn total_energy_mwh(&self) -> f64 {
        numeric::sum(self.facilities.iter().filter_map(|f| f.energy_mwh))
    }
}

/// Attribute every facility. Facilities that cannot be attributed stay in
/// the facility list (with energy when a capacity exists) and are flagged.
pub fn attribute_all(
    facilities: &[DataCenterRecord],
    grid: &Grid,
    params: &LoadParams,
) -> Result<AttributionRun, AttributionError> {
    check_uptime(params.uptime)?;
    let mut sorted: Vec<&DataCenterRecord> = facilities.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = Vec::with_capacity(sorted.len());
    let mut results = Vec::new();
    for dc in sorted {
        let uptime = dc.uptime.unwrap_or(params.uptime);
        let mut entry = FacilityEnergy {
            dc_id: dc.id.clone(),
            state: dc.state.clone(),
            ba_id: dc.ba_id.clone(),
            capacity_mw: dc.power_capacity_mw,
            uptime,
            energy_mwh: None,
            status: FacilityStatus::NoCapacity,
            reason: None,
        };
        let energy = match facility_energy(dc, params) {
            Ok(e) => e,
            Err(e) => {
                entry.reason = Some(e.to_string());
                out.push(entry);
                continue;
            }
        };
        entry.energy_mwh = Some(energy);
        let attributed = dc
            .ba_id
            .as_deref()
            .ok_or_else(|| AttributionError::MissingBa(dc.id.clone()))
            .and_then(|ba| grid.coefficients(ba))
            .and_then(|coeffs| split_load(&dc.id, energy, coeffs, grid));
        match attributed {
            Ok(rows) => {
                entry.status = FacilityStatus::Attributed;
                results.extend(rows);
            }
            Err(e) => {
                entry.status = FacilityStatus::Unattributable;
                entry.reason = Some(e.to_string());
            }
        }
        out.push(entry);
    }
    Ok(AttributionRun { year: params.year, default_uptime: params.uptime, facilities: out, results })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsequentialSummary {
    pub total_emissions_g: f64,
    pub included_load_mwh: f64,
    pub n_included: usize,
    /// Facilities with energy but no marginal rate for their BA.
    pub excluded_dc_ids: Vec<String>,
}

/// Σ facility energy × marginal rate of its BA. Facilities without a rate
/// (or without a BA) are excluded and listed.
pub fn consequential_totals(
    facilities: &[FacilityEnergy],
    rates: &BTreeMap<String, MarginalRate>,
) -> ConsequentialSummary {
    let mut total = CompensatedSum::new();
    let mut load = CompensatedSum::new();
    let mut n_included = 0;
    let mut excluded = Vec::new();
    for f in facilities {
        let Some(energy) = f.energy_mwh else { continue };
        match f.ba_id.as_ref().and_then(|ba| rates.get(ba)) {
            Some(rate) => {
                total.add(consequential_emissions(energy, rate));
                load.add(energy);
                n_included += 1;
            }
            None => excluded.push(f.dc_id.clone()),
        }
    }
    ConsequentialSummary {
        total_emissions_g: total.value(),
        included_load_mwh: load.value(),
        n_included,
        excluded_dc_ids: excluded,
    }
}
