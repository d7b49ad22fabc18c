use super::{rank, RankMetric, ReportError, RollupLevel, RollupReport, RollupRow};
use crate::numeric::round_dp;
use crate::record::FuelCategory;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

const CSV_HEADER: &str =
    "level,key,n_data_centers,total_capacity_mw,energy_twh,emissions_mt,intensity_g_per_kwh,primary_ba,fuel_mix";

// declared precision: energy and emissions 2 dp, intensity 0 dp, shares 4 dp
const ENERGY_DP: u32 = 2;
const EMISSIONS_DP: u32 = 2;
const CAPACITY_DP: u32 = 2;
const INTENSITY_DP: u32 = 0;
const SHARE_DP: u32 = 4;

fn fixed(value: f64, dp: u32) -> String {
    format!("{:.*}", dp as usize, round_dp(value, dp))
}

fn fuel_cell(mix: &BTreeMap<FuelCategory, f64>) -> String {
    mix.iter().map(|(f, s)| format!("{}={}", f.as_str(), fixed(*s, SHARE_DP))).collect::<Vec<_>>().join(";")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_csv(report: &RollupReport) -> Vec<u8> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            report.level,
            csv_field(&row.key),
            row.n_data_centers,
            fixed(row.total_capacity_mw, CAPACITY_DP),
            fixed(row.energy_twh, ENERGY_DP),
            fixed(row.emissions_mt, EMISSIONS_DP),
            row.intensity_g_per_kwh.map(|v| fixed(v, INTENSITY_DP)).unwrap_or_default(),
            csv_field(row.primary_ba.as_deref().unwrap_or_default()),
            fuel_cell(&row.fuel_mix),
        ));
    }
    out.into_bytes()
}

#[derive(Serialize)]
struct JsonRow<'a> {
    key: &'a str,
    n_data_centers: usize,
    total_capacity_mw: f64,
    energy_twh: f64,
    emissions_mt: f64,
    intensity_g_per_kwh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    primary_ba: Option<&'a str>,
    fuel_mix: BTreeMap<FuelCategory, f64>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    level: RollupLevel,
    year: i32,
    rows: Vec<JsonRow<'a>>,
}

fn to_json(report: &RollupReport) -> Vec<u8> {
    let doc = JsonReport {
        level: report.level,
        year: report.year,
        rows: report
            .rows
            .iter()
            .map(|r| JsonRow {
                key: &r.key,
                n_data_centers: r.n_data_centers,
                total_capacity_mw: round_dp(r.total_capacity_mw, CAPACITY_DP),
                energy_twh: round_dp(r.energy_twh, ENERGY_DP),
                emissions_mt: round_dp(r.emissions_mt, EMISSIONS_DP),
                intensity_g_per_kwh: r.intensity_g_per_kwh.map(|v| round_dp(v, INTENSITY_DP)),
                primary_ba: r.primary_ba.as_deref(),
                fuel_mix: r.fuel_mix.iter().map(|(f, s)| (*f, round_dp(*s, SHARE_DP))).collect(),
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

/// Render a report at its declared precision. Output bytes depend only on
/// the report contents.
pub fn export(report: &RollupReport, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => to_csv(report),
        ExportFormat::Json => to_json(report),
    }
}

pub fn export_to<W: Write>(report: &RollupReport, format: ExportFormat, mut sink: W) -> io::Result<()> {
    sink.write_all(&export(report, format))?;
    sink.flush()
}

fn parse_num(field: &str, column: &str) -> Result<f64, ReportError> {
    field.parse().map_err(|_| ReportError::Parse(format!("bad {column} {field:?}")))
}

/// Read back a CSV produced by [`export`]. Values come back at the exported precision.
pub fn parse_csv_export(bytes: &[u8]) -> Result<RollupReport, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes);
    let headers = rdr.headers().map_err(|e| ReportError::Parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(ReportError::Parse("unexpected header".into()));
    }
    let mut level = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ReportError::Parse(e.to_string()))?;
        let f = |i: usize| rec.get(i).unwrap_or_default();
        level = Some(f(0).parse::<RollupLevel>()?);
        let fuel_mix = f(8)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|pair| {
                let (k, v) =
                    pair.split_once('=').ok_or_else(|| ReportError::Parse(format!("bad fuel share {pair:?}")))?;
                let fuel = FuelCategory::from_code(k).ok_or_else(|| ReportError::Parse(format!("bad fuel {k:?}")))?;
                Ok((fuel, parse_num(v, "fuel share")?))
            })
            .collect::<Result<_, ReportError>>()?;
        rows.push(RollupRow {
            key: f(1).to_string(),
            n_data_centers: f(2).parse().map_err(|_| ReportError::Parse("bad count".into()))?,
            total_capacity_mw: parse_num(f(3), "total_capacity_mw")?,
            energy_twh: parse_num(f(4), "energy_twh")?,
            emissions_mt: parse_num(f(5), "emissions_mt")?,
            intensity_g_per_kwh: if f(6).is_empty() { None } else { Some(parse_num(f(6), "intensity")?) },
            primary_ba: Some(f(7)).filter(|s| !s.is_empty()).map(str::to_string),
            fuel_mix,
        });
    }
    Ok(RollupReport { level: level.unwrap_or(RollupLevel::National), year: 0, rows })
}

/// Top-k states by emissions in the shape of a ranked summary table.
pub fn table1_csv(state_report: &RollupReport, k: usize) -> Vec<u8> {
    let mut out = String::from(
        "rank,state,n_data_centers,total_capacity_mw,energy_twh,emissions_mt,intensity_g_per_kwh,primary_ba\n",
    );
    for (i, row) in rank(state_report, RankMetric::Emissions, k).into_iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i + 1,
            csv_field(&row.key),
            row.n_data_centers,
            fixed(row.total_capacity_mw, CAPACITY_DP),
            fixed(row.energy_twh, ENERGY_DP),
            fixed(row.emissions_mt, EMISSIONS_DP),
            row.intensity_g_per_kwh.map(|v| fixed(v, INTENSITY_DP)).unwrap_or_default(),
            csv_field(row.primary_ba.as_deref().unwrap_or_default()),
        ));
    }
    out.into_bytes()
}
