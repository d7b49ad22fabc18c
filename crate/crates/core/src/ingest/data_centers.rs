use super::{check_lat_lon, csv_reader, parse_f64, parse_opt_f64, Columns, IngestError, IngestReport, Rejection};
use crate::record::{CapacityProvenance, DataCenterRecord, DcType, SqftSource};
use std::io::Read;

const MANDATORY: &[&str] = &[
    "id",
    "provider",
    "address",
    "state",
    "latitude",
    "longitude",
    "square_footage",
    "sqft_source",
    "dc_type",
    "climate_type",
    "power_capacity_mw",
];

/// The 48 contiguous states plus the District of Columbia.
pub const CONTIGUOUS_STATES: &[&str] = &[
    "AL", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME", "MD",
    "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI",
    "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY",
];

const NON_CONTIGUOUS: &[&str] = &["AK", "HI", "PR", "GU", "VI", "AS", "MP", "UM"];

fn is_known_state(code: &str) -> bool {
    CONTIGUOUS_STATES.contains(&code) || NON_CONTIGUOUS.contains(&code)
}

/// Parse a data-center CSV. `source_tag` names the dataset the file came
/// from; it becomes the record's `origin` and the default `sqft_source` for
/// rows that carry a footage value without naming its source.
///
/// An optional `uptime` column overrides the run-wide uptime per facility.
pub fn parse_data_centers<R: Read>(
    reader: R,
    source_tag: SqftSource,
) -> Result<(Vec<DataCenterRecord>, IngestReport), IngestError> {
    let source_name = source_tag.as_str();
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Header { source_name: source_name.to_string(), message: e.to_string() })?;
    let cols = Columns::new(headers, MANDATORY, source_name)?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for result in rdr.records() {
        report.records_read += 1;
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                report.reject(Rejection {
                    source: source_name.to_string(),
                    row: e.position().map(|p| p.line()),
                    record_id: None,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line());
        match data_center_from_row(&cols, &row, source_tag) {
            Ok(rec) => {
                report.records_accepted += 1;
                records.push(rec);
            }
            Err(reason) => report.reject(Rejection {
                source: source_name.to_string(),
                row: line,
                record_id: cols.get(&row, "id").map(str::to_string),
                reason,
            }),
        }
    }
    Ok((records, report))
}

fn data_center_from_row(
    cols: &Columns,
    row: &csv::StringRecord,
    origin: SqftSource,
) -> Result<DataCenterRecord, String> {
    let id = cols.get(row, "id").ok_or("missing id")?.to_string();

    let state = cols.get(row, "state").ok_or("missing state")?.to_ascii_uppercase();
    if state.len() != 2 || !is_known_state(&state) {
        return Err(format!("unknown state code {state:?}"));
    }

    let latitude = parse_f64(cols.get(row, "latitude"), "latitude")?;
    let longitude = parse_f64(cols.get(row, "longitude"), "longitude")?;
    check_lat_lon(latitude, longitude)?;

    let square_footage = parse_opt_f64(cols.get(row, "square_footage"), "square_footage")?;
    if let Some(sqft) = square_footage {
        if sqft <= 0.0 {
            return Err("square_footage must be positive".to_string());
        }
    }
    let sqft_source = match cols.get(row, "sqft_source") {
        Some(s) => Some(s.parse::<SqftSource>()?),
        None => square_footage.map(|_| origin),
    };
    // a source without a value carries nothing
    let sqft_source = square_footage.and(sqft_source);

    let power_capacity_mw = parse_opt_f64(cols.get(row, "power_capacity_mw"), "power_capacity_mw")?;
    if let Some(cap) = power_capacity_mw {
        if cap <= 0.0 {
            return Err("power_capacity_mw must be positive".to_string());
        }
    }

    let uptime = parse_opt_f64(cols.get(row, "uptime"), "uptime")?;
    if let Some(u) = uptime {
        if !(u > 0.0 && u <= 1.0) {
            return Err("uptime must lie in (0, 1]".to_string());
        }
    }

    Ok(DataCenterRecord {
        id,
        provider: cols.get(row, "provider").unwrap_or_default().to_string(),
        address: cols.get(row, "address").unwrap_or_default().to_string(),
        state,
        latitude,
        longitude,
        square_footage,
        sqft_source,
        dc_type: DcType::from_label(cols.get(row, "dc_type").unwrap_or_default()),
        climate_type: cols.get(row, "climate_type").unwrap_or("unknown").to_string(),
        power_capacity_mw,
        capacity_provenance: power_capacity_mw.map(|_| CapacityProvenance::Reported),
        uptime,
        origin,
        ba_id: None,
        ba_flag: None,
    })
}

/// Drop facilities outside the contiguous United States (Alaska, Hawaii and
/// the territories), moving them to the rejected column of `report`.
pub fn filter_contiguous(records: Vec<DataCenterRecord>, report: &mut IngestReport) -> Vec<DataCenterRecord> {
    let mut kept = Vec::with_capacity(records.len());
    for rec in records {
        if CONTIGUOUS_STATES.contains(&rec.state.as_str()) {
            kept.push(rec);
        } else {
            report.reject_accepted(Rejection {
                source: rec.origin.as_str().to_string(),
                row: None,
                record_id: Some(rec.id.clone()),
                reason: format!("outside contiguous US ({})", rec.state),
            });
        }
    }
    kept
}
