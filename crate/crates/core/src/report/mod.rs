//! Aggregation of attribution output by nation, balancing authority and state.

mod benchmark;
mod detail;
mod export;

pub use benchmark::{compare_benchmarks, parse_benchmarks, BenchmarkComparison, CountryBenchmark};
pub use detail::{ba_details, BaDetail, PlantSummary};
pub use export::{export, export_to, parse_csv_export, table1_csv, ExportFormat};

use crate::attribution::{carbon_intensity, AttributionRun, FacilityEnergy};
use crate::numeric::{self, CompensatedSum};
use crate::record::FuelCategory;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const NATIONAL_KEY: &str = "US";
pub const UNKNOWN_STATE: &str = "unknown";
pub const UNASSIGNED_BA: &str = "unassigned";

const MWH_PER_TWH: f64 = 1e6;
const GRAMS_PER_MT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown level {0:?}; expected national, ba or state")]
    UnknownLevel(String),
    #[error("unknown metric {0:?}; expected emissions, energy, intensity or count")]
    UnknownMetric(String),
    #[error("benchmark file: {0}")]
    Benchmarks(String),
    #[error("malformed export: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollupLevel {
    National,
    Ba,
    State,
}

impl RollupLevel {
    pub const ALL: [RollupLevel; 3] = [RollupLevel::National, RollupLevel::Ba, RollupLevel::State];

    pub fn as_str(self) -> &'static str {
        match self {
            RollupLevel::National => "national",
            RollupLevel::Ba => "ba",
            RollupLevel::State => "state",
        }
    }
}

impl fmt::Display for RollupLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RollupLevel {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "national" => Ok(RollupLevel::National),
            "ba" => Ok(RollupLevel::Ba),
            "state" => Ok(RollupLevel::State),
            other => Err(ReportError::UnknownLevel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollupRow {
    pub key: String,
    pub n_data_centers: usize,
    pub total_capacity_mw: f64,
    /// Energy of every facility in the group, attributed or not.
    pub energy_twh: f64,
    pub emissions_mt: f64,
    /// Emissions over attributed load; `None` when nothing was attributed.
    pub intensity_g_per_kwh: Option<f64>,
    pub fuel_mix: BTreeMap<FuelCategory, f64>,
    /// State rows only: the authority supplying most of the state's energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_ba: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollupReport {
    pub level: RollupLevel,
    pub year: i32,
    /// Sorted by key.
    pub rows: Vec<RollupRow>,
}

impl RollupReport {
    pub fn row(&self, key: &str) -> Option<&RollupRow> {
        self.rows.iter().find(|r| r.key == key)
    }
}

fn group_key(f: &FacilityEnergy, level: RollupLevel) -> String {
    match level {
        RollupLevel::National => NATIONAL_KEY.to_string(),
        RollupLevel::State if f.state.is_empty() => UNKNOWN_STATE.to_string(),
        RollupLevel::State => f.state.clone(),
        RollupLevel::Ba => f.ba_id.clone().unwrap_or_else(|| UNASSIGNED_BA.to_string()),
    }
}

#[derive(Default)]
struct Group {
    n: usize,
    capacity: CompensatedSum,
    energy: CompensatedSum,
    attributed_load: CompensatedSum,
    emissions: CompensatedSum,
    fuel: BTreeMap<FuelCategory, CompensatedSum>,
    energy_by_ba: BTreeMap<String, CompensatedSum>,
}

/// Group facilities and their attributed pairs by `level`. Emissions count
/// toward the group of the facility, wherever the supplying plants are.
pub fn rollup(run: &AttributionRun, level: RollupLevel) -> RollupReport {
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    let mut key_of: HashMap<&str, String> = HashMap::with_capacity(run.facilities.len());
    for f in &run.facilities {
        let key = group_key(f, level);
        let g = groups.entry(key.clone()).or_default();
        g.n += 1;
        if let Some(c) = f.capacity_mw {
            g.capacity.add(c);
        }
        if let Some(e) = f.energy_mwh {
            g.energy.add(e);
            let ba = f.ba_id.clone().unwrap_or_else(|| UNASSIGNED_BA.to_string());
            g.energy_by_ba.entry(ba).or_default().add(e);
        }
        key_of.insert(f.dc_id.as_str(), key);
    }
    for r in &run.results {
        let Some(key) = key_of.get(r.dc_id.as_str()) else { continue };
        let g = groups.get_mut(key).expect("group exists");
        g.attributed_load.add(r.load_mwh);
        g.emissions.add(r.emissions_g);
        g.fuel.entry(r.fuel_category).or_default().add(r.load_mwh);
    }

    let rows = groups
        .into_iter()
        .map(|(key, g)| {
            let load = g.attributed_load.value();
            let fuel_mix =
                if load > 0.0 { g.fuel.iter().map(|(f, l)| (*f, l.value() / load)).collect() } else { BTreeMap::new() };
            let primary_ba = (level == RollupLevel::State)
                .then(|| {
                    // largest energy, ties to the smallest id
                    g.energy_by_ba
                        .iter()
                        .fold(None::<(&String, f64)>, |best, (ba, e)| match best {
                            Some((_, be)) if be >= e.value() => best,
                            _ => Some((ba, e.value())),
                        })
                        .map(|(ba, _)| ba.clone())
                })
                .flatten();
            RollupRow {
                key,
                n_data_centers: g.n,
                total_capacity_mw: g.capacity.value(),
                energy_twh: g.energy.value() / MWH_PER_TWH,
                emissions_mt: g.emissions.value() / GRAMS_PER_MT,
                intensity_g_per_kwh: carbon_intensity(g.emissions.value(), load),
                fuel_mix,
                primary_ba,
            }
        })
        .collect();
    RollupReport { level, year: run.year, rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    Emissions,
    Energy,
    Intensity,
    Count,
}

impl FromStr for RankMetric {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "emissions" => Ok(RankMetric::Emissions),
            "energy" => Ok(RankMetric::Energy),
            "intensity" => Ok(RankMetric::Intensity),
            "count" => Ok(RankMetric::Count),
            other => Err(ReportError::UnknownMetric(other.to_string())),
        }
    }
}

fn metric_value(row: &RollupRow, metric: RankMetric) -> Option<f64> {
    match metric {
        RankMetric::Emissions => Some(row.emissions_mt),
        RankMetric::Energy => Some(row.energy_twh),
        RankMetric::Intensity => row.intensity_g_per_kwh,
        RankMetric::Count => Some(row.n_data_centers as f64),
    }
}

/// Top `k` rows by `metric`, descending, ties broken by key. Rows without a
/// value for the metric (intensity of an unattributed group) sort last.
pub fn rank(report: &RollupReport, metric: RankMetric, k: usize) -> Vec<&RollupRow> {
    let mut rows: Vec<&RollupRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        let (va, vb) = (metric_value(a, metric), metric_value(b, metric));
        match (va, vb) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.key.cmp(&b.key))
    });
    rows.truncate(k);
    rows
}

/// Sum of an additive column across rows, used to check level consistency.
pub fn column_total(report: &RollupReport, get: impl Fn(&RollupRow) -> f64) -> f64 {
    numeric::sum(report.rows.iter().map(get))
}

#[cfg(test)]
mod tests;
