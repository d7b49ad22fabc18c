use super::{check_lat_lon, csv_reader, parse_f64, Columns, IngestError, IngestReport, Rejection};
use crate::record::{EmissionRateUnit, FuelCategory, PowerPlantRecord};
use std::io::Read;

const SOURCE: &str = "plants";

const MANDATORY: &[&str] = &[
    "plant_id",
    "latitude",
    "longitude",
    "ba_id",
    "fuel_category",
    "annual_net_generation_mwh",
    "emission_rate",
    "emission_rate_unit",
    "nameplate_capacity_mw",
];

/// Inclusion rule for plants entering the generation-weighted pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantFilter {
    /// Plants with a nameplate capacity below this are excluded.
    pub min_nameplate_mw: f64,
}

impl Default for PlantFilter {
    fn default() -> Self {
        PlantFilter { min_nameplate_mw: 25.0 }
    }
}

/// Parse a power-plant CSV, converting emission rates to g/kWh.
///
/// Plants below the nameplate threshold, with non-positive net generation,
/// or lacking generation or emission fields are excluded and counted in the
/// report. Unknown fuel codes map to [`FuelCategory::Other`] with a warning.
pub fn parse_power_plants<R: Read>(
    reader: R,
    filter: PlantFilter,
) -> Result<(Vec<PowerPlantRecord>, IngestReport), IngestError> {
    let mut rdr = csv_reader(reader);
    let headers =
        rdr.headers().map_err(|e| IngestError::Header { source_name: SOURCE.to_string(), message: e.to_string() })?;
    let cols = Columns::new(headers, MANDATORY, SOURCE)?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for result in rdr.records() {
        report.records_read += 1;
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                report.reject(Rejection {
                    source: SOURCE.to_string(),
                    row: e.position().map(|p| p.line()),
                    record_id: None,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line());
        match plant_from_row(&cols, &row, filter, &mut report.warnings) {
            Ok(rec) => {
                report.records_accepted += 1;
                records.push(rec);
            }
            Err(reason) => report.reject(Rejection {
                source: SOURCE.to_string(),
                row: line,
                record_id: cols.get(&row, "plant_id").map(str::to_string),
                reason,
            }),
        }
    }
    Ok((records, report))
}

fn plant_from_row(
    cols: &Columns,
    row: &csv::StringRecord,
    filter: PlantFilter,
    warnings: &mut Vec<String>,
) -> Result<PowerPlantRecord, String> {
    let plant_id = cols.get(row, "plant_id").ok_or("missing plant_id")?.to_string();
    let latitude = parse_f64(cols.get(row, "latitude"), "latitude")?;
    let longitude = parse_f64(cols.get(row, "longitude"), "longitude")?;
    check_lat_lon(latitude, longitude)?;

    let generation = parse_f64(cols.get(row, "annual_net_generation_mwh"), "annual_net_generation_mwh")?;
    if generation <= 0.0 {
        return Err("non-positive annual net generation".to_string());
    }

    let rate = parse_f64(cols.get(row, "emission_rate"), "emission_rate")?;
    let unit: EmissionRateUnit = cols.get(row, "emission_rate_unit").ok_or("missing emission_rate_unit")?.parse()?;
    if rate < 0.0 {
        return Err("negative emission rate".to_string());
    }

    let nameplate = parse_f64(cols.get(row, "nameplate_capacity_mw"), "nameplate_capacity_mw")?;
    if nameplate < filter.min_nameplate_mw {
        return Err(format!("nameplate {nameplate} MW below inclusion threshold {} MW", filter.min_nameplate_mw));
    }

    let fuel_code = cols.get(row, "fuel_category").unwrap_or_default();
    let fuel_category = FuelCategory::from_code(fuel_code).unwrap_or_else(|| {
        log::warn!("plant {plant_id}: unknown fuel code {fuel_code:?}, mapped to other");
        warnings.push(format!("plant {plant_id}: unknown fuel code {fuel_code:?} mapped to other"));
        FuelCategory::Other
    });

    Ok(PowerPlantRecord {
        plant_id,
        latitude,
        longitude,
        ba_id: cols.get(row, "ba_id").map(str::to_string),
        fuel_category,
        annual_net_generation_mwh: generation,
        emission_rate_g_per_kwh: unit.to_g_per_kwh(rate),
        nameplate_capacity_mw: nameplate,
    })
}
