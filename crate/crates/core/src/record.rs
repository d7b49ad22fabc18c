//! Canonical facility and plant records produced by ingestion.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Grams per pound (exact by definition of the avoirdupois pound).
pub const GRAMS_PER_POUND: f64 = 453.592_37;

/// Where a square-footage figure came from. Also used to tag which
/// dataset a facility row was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqftSource {
    Baxtel,
    Scraped,
    Osm,
}

impl SqftSource {
    /// Lower is preferred: baxtel > scraped > osm.
    pub fn priority(self) -> u8 {
        match self {
            SqftSource::Baxtel => 0,
            SqftSource::Scraped => 1,
            SqftSource::Osm => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SqftSource::Baxtel => "baxtel",
            SqftSource::Scraped => "scraped",
            SqftSource::Osm => "osm",
        }
    }
}

impl FromStr for SqftSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baxtel" => Ok(SqftSource::Baxtel),
            "scraped" | "datacenters.com" | "web" => Ok(SqftSource::Scraped),
            "osm" | "openstreetmap" => Ok(SqftSource::Osm),
            other => Err(format!("unknown square footage source {other:?}")),
        }
    }
}

impl fmt::Display for SqftSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcType {
    Hyperscale,
    Other,
}

impl DcType {
    /// Every label other than "hyperscale" collapses to `Other`.
    pub fn from_label(label: &str) -> Self {
        if label.trim().eq_ignore_ascii_case("hyperscale") {
            DcType::Hyperscale
        } else {
            DcType::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DcType::Hyperscale => "hyperscale",
            DcType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityProvenance {
    Reported,
    Imputed,
}

/// Outcome flag of a balancing-authority assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentFlag {
    /// No region contained the point; nearest boundary was used.
    Fallback,
    /// Several regions contained the point; the smallest was used.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCenterRecord {
    pub id: String,
    pub provider: String,
    pub address: String,
    pub state: String,
    pub latitude: f64,
    pub longitude: f64,
    pub square_footage: Option<f64>,
    pub sqft_source: Option<SqftSource>,
    pub dc_type: DcType,
    pub climate_type: String,
    pub power_capacity_mw: Option<f64>,
    pub capacity_provenance: Option<CapacityProvenance>,
    /// Per-facility uptime override; the run-wide default applies when absent.
    #[serde(default)]
    pub uptime: Option<f64>,
    /// Dataset the row was read from.
    pub origin: SqftSource,
    pub ba_id: Option<String>,
    #[serde(default)]
    pub ba_flag: Option<AssignmentFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelCategory {
    Coal,
    NaturalGas,
    Oil,
    Nuclear,
    Hydro,
    Wind,
    Solar,
    Geothermal,
    Biomass,
    Other,
}

/// Coarse grouping used for the fossil / nuclear / renewable split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelGroup {
    Fossil,
    Nuclear,
    Renewable,
    Other,
}

impl FuelCategory {
    pub const ALL: [FuelCategory; 10] = [
        FuelCategory::Coal,
        FuelCategory::NaturalGas,
        FuelCategory::Oil,
        FuelCategory::Nuclear,
        FuelCategory::Hydro,
        FuelCategory::Wind,
        FuelCategory::Solar,
        FuelCategory::Geothermal,
        FuelCategory::Biomass,
        FuelCategory::Other,
    ];

    /// Map a fuel label to a category. Accepts the canonical snake_case names,
    /// eGRID plant fuel categories (`COAL`, `GAS`, `OFSL`, ...) and eGRID
    /// primary fuel codes (`BIT`, `NG`, `WAT`, ...). Returns `None` for
    /// anything unrecognised.
    pub fn from_code(code: &str) -> Option<Self> {
        let c = code.trim().to_ascii_uppercase();
        let cat = match c.as_str() {
            "COAL" | "BIT" | "SUB" | "LIG" | "RC" | "WC" | "SGC" | "ANT" => FuelCategory::Coal,
            "NATURAL_GAS" | "GAS" | "NG" | "OG" | "BFG" | "PG" | "SG" => FuelCategory::NaturalGas,
            "OIL" | "DFO" | "RFO" | "JF" | "KER" | "WO" | "PC" => FuelCategory::Oil,
            "NUCLEAR" | "NUC" => FuelCategory::Nuclear,
            "HYDRO" | "WAT" => FuelCategory::Hydro,
            "WIND" | "WND" => FuelCategory::Wind,
            "SOLAR" | "SUN" => FuelCategory::Solar,
            "GEOTHERMAL" | "GEO" => FuelCategory::Geothermal,
            "BIOMASS" | "WDS" | "WDL" | "BLQ" | "AB" | "MSB" | "OBS" | "OBL" | "LFG" | "OBG" => FuelCategory::Biomass,
            "OTHER" | "OFSL" | "OTHF" | "MSN" | "PUR" | "WH" | "TDF" | "MWH" | "H" => FuelCategory::Other,
            _ => return None,
        };
        Some(cat)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FuelCategory::Coal => "coal",
            FuelCategory::NaturalGas => "natural_gas",
            FuelCategory::Oil => "oil",
            FuelCategory::Nuclear => "nuclear",
            FuelCategory::Hydro => "hydro",
            FuelCategory::Wind => "wind",
            FuelCategory::Solar => "solar",
            FuelCategory::Geothermal => "geothermal",
            FuelCategory::Biomass => "biomass",
            FuelCategory::Other => "other",
        }
    }

    pub fn group(self) -> FuelGroup {
        match self {
            FuelCategory::Coal | FuelCategory::NaturalGas | FuelCategory::Oil => FuelGroup::Fossil,
            FuelCategory::Nuclear => FuelGroup::Nuclear,
            FuelCategory::Hydro
            | FuelCategory::Wind
            | FuelCategory::Solar
            | FuelCategory::Geothermal
            | FuelCategory::Biomass => FuelGroup::Renewable,
            FuelCategory::Other => FuelGroup::Other,
        }
    }
}

impl fmt::Display for FuelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuelCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FuelCategory::from_code(s).ok_or_else(|| format!("unknown fuel code {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionRateUnit {
    GPerKwh,
    LbPerMwh,
}

impl EmissionRateUnit {
    /// Convert a rate in this unit to grams CO2e per kWh.
    pub fn to_g_per_kwh(self, value: f64) -> f64 {
        match self {
            EmissionRateUnit::GPerKwh => value,
            // lb/MWh * g/lb / (kWh/MWh)
            EmissionRateUnit::LbPerMwh => value * GRAMS_PER_POUND / 1000.0,
        }
    }

    /// Convert a rate in grams CO2e per kWh to this unit.
    pub fn from_g_per_kwh(self, value: f64) -> f64 {
        match self {
            EmissionRateUnit::GPerKwh => value,
            EmissionRateUnit::LbPerMwh => value * 1000.0 / GRAMS_PER_POUND,
        }
    }
}

impl FromStr for EmissionRateUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "g_per_kwh" => Ok(EmissionRateUnit::GPerKwh),
            "lb_per_mwh" => Ok(EmissionRateUnit::LbPerMwh),
            other => Err(format!("unknown emission rate unit {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPlantRecord {
    pub plant_id: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Taken from the input when present, otherwise filled by spatial assignment.
    pub ba_id: Option<String>,
    pub fuel_category: FuelCategory,
    pub annual_net_generation_mwh: f64,
    pub emission_rate_g_per_kwh: f64,
    pub nameplate_capacity_mw: f64,
}
