//! Parsing, validation, de-duplication and merging of facility and plant inputs.

mod data_centers;
mod dedup;
mod plants;

pub use data_centers::{filter_contiguous, parse_data_centers, CONTIGUOUS_STATES};
pub use dedup::{dedup_facilities, merge_square_footage};
pub use plants::{parse_power_plants, PlantFilter};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Fatal ingestion errors. Bad rows are never fatal; they end up in
/// [`IngestReport::rejection_reasons`].
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{source_name}: missing mandatory column `{column}`")]
    MissingColumn { source_name: String, column: String },
    #[error("{source_name}: unreadable header: {message}")]
    Header { source_name: String, message: String },
    #[error("dedup radius must be positive, got {0}")]
    InvalidRadius(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub source: String,
    /// 1-based line number in the source file, when the rejection happened during parsing.
    pub row: Option<u64>,
    pub record_id: Option<String>,
    pub reason: String,
}

/// Ingestion bookkeeping. `records_read = records_accepted + records_rejected
/// + duplicates_merged` holds after every operation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_read: u64,
    pub records_accepted: u64,
    pub records_rejected: u64,
    pub duplicates_merged: u64,
    pub rejection_reasons: Vec<Rejection>,
    pub warnings: Vec<String>,
}

impl IngestReport {
    pub(crate) fn reject(&mut self, rejection: Rejection) {
        self.records_rejected += 1;
        self.rejection_reasons.push(rejection);
    }

    /// Move an already accepted record to the rejected column.
    pub(crate) fn reject_accepted(&mut self, rejection: Rejection) {
        self.records_accepted -= 1;
        self.reject(rejection);
    }

    pub fn is_consistent(&self) -> bool {
        self.records_read == self.records_accepted + self.records_rejected + self.duplicates_merged
    }

    /// Fold another stage's report into this one.
    pub fn absorb(&mut self, other: IngestReport) {
        self.records_read += other.records_read;
        self.records_accepted += other.records_accepted;
        self.records_rejected += other.records_rejected;
        self.duplicates_merged += other.duplicates_merged;
        self.rejection_reasons.extend(other.rejection_reasons);
        self.warnings.extend(other.warnings);
    }
}

/// Column lookup built from a header row.
pub(crate) struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    pub(crate) fn new(headers: &csv::StringRecord, mandatory: &[&str], source_name: &str) -> Result<Self, IngestError> {
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase(), i))
            .collect();
        for col in mandatory {
            if !index.contains_key(*col) {
                return Err(IngestError::MissingColumn {
                    source_name: source_name.to_string(),
                    column: col.to_string(),
                });
            }
        }
        Ok(Columns { index })
    }

    /// Trimmed cell value; `None` for a missing or empty cell.
    pub(crate) fn get<'r>(&self, row: &'r csv::StringRecord, column: &str) -> Option<&'r str> {
        let i = *self.index.get(column)?;
        row.get(i).map(str::trim).filter(|s| !s.is_empty())
    }
}

pub(crate) fn csv_reader<R: std::io::Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader)
}

/// Parse an optional numeric cell. Malformed text is an error, never a silent default.
pub(crate) fn parse_opt_f64(value: Option<&str>, column: &str) -> Result<Option<f64>, String> {
    match value {
        None => Ok(None),
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(format!("unparseable {column} {s:?}")),
        },
    }
}

pub(crate) fn parse_f64(value: Option<&str>, column: &str) -> Result<f64, String> {
    parse_opt_f64(value, column)?.ok_or_else(|| format!("missing {column}"))
}

pub(crate) fn check_lat_lon(lat: f64, lon: f64) -> Result<(), String> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err("latitude out of range".to_string());
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err("longitude out of range".to_string());
    }
    Ok(())
}
