use super::{RollupLevel, RollupReport};
use crate::attribution::Grid;
use crate::record::FuelCategory;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSummary {
    pub plant_id: String,
    pub fuel_category: FuelCategory,
    pub coefficient: f64,
    pub annual_net_generation_mwh: f64,
    pub emission_rate_g_per_kwh: f64,
}

/// Everything known about one balancing authority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaDetail {
    pub ba_id: String,
    pub name: String,
    pub n_data_centers: usize,
    pub total_capacity_mw: f64,
    pub energy_twh: f64,
    pub emissions_mt: f64,
    pub intensity_g_per_kwh: Option<f64>,
    pub fuel_mix: BTreeMap<FuelCategory, f64>,
    /// True when the authority has no eligible generation pool.
    pub unattributable: bool,
    pub plants: Vec<PlantSummary>,
}

/// Details for every authority named by the roll-up, the grid or `names`.
/// Figures come straight from the BA-level roll-up rows.
pub fn ba_details(
    ba_rollup: &RollupReport,
    grid: &Grid,
    names: &BTreeMap<String, String>,
) -> BTreeMap<String, BaDetail> {
    assert_eq!(ba_rollup.level, RollupLevel::Ba, "ba_details needs a BA-level roll-up");
    let ids: BTreeSet<String> = ba_rollup
        .rows
        .iter()
        .map(|r| r.key.clone())
        .chain(grid.ba_ids().map(str::to_string))
        .chain(names.keys().cloned())
        .collect();
    ids.into_iter()
        .map(|ba| {
            let row = ba_rollup.row(&ba);
            let coeffs = grid.coefficients(&ba).ok();
            let plants = coeffs
                .map(|c| {
                    c.shares
                        .iter()
                        .filter_map(|s| {
                            grid.plant(&s.plant_id).map(|p| PlantSummary {
                                plant_id: p.plant_id.clone(),
                                fuel_category: p.fuel_category,
                                coefficient: s.coefficient,
                                annual_net_generation_mwh: p.annual_net_generation_mwh,
                                emission_rate_g_per_kwh: p.emission_rate_g_per_kwh,
                            })
                        })
                        .collect()
                })
                .unwrap_or_default();
            let detail = BaDetail {
                name: names.get(&ba).cloned().unwrap_or_else(|| ba.clone()),
                n_data_centers: row.map_or(0, |r| r.n_data_centers),
                total_capacity_mw: row.map_or(0.0, |r| r.total_capacity_mw),
                energy_twh: row.map_or(0.0, |r| r.energy_twh),
                emissions_mt: row.map_or(0.0, |r| r.emissions_mt),
                intensity_g_per_kwh: row.and_then(|r| r.intensity_g_per_kwh),
                fuel_mix: row.map(|r| r.fuel_mix.clone()).unwrap_or_default(),
                unattributable: coeffs.is_none(),
                plants,
                ba_id: ba.clone(),
            };
            (ba, detail)
        })
        .collect()
}
