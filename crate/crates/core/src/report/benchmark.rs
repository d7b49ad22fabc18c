use super::ReportError;
use serde::{Deserialize, Serialize};
use std::io::Read;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryBenchmark {
    pub country: String,
    pub total_twh: f64,
    pub intensity_g_per_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkComparison {
    pub country: String,
    pub benchmark_intensity_g_per_kwh: f64,
    pub subject_intensity_g_per_kwh: f64,
    /// subject / benchmark; `None` for a zero benchmark.
    pub ratio: Option<f64>,
    /// (ratio - 1) · 100.
    pub percent_difference: Option<f64>,
}

/// Read a `country,total_twh,intensity_g_per_kwh` CSV.
pub fn parse_benchmarks<R: Read>(reader: R) -> Result<Vec<CountryBenchmark>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CountryBenchmark>().enumerate() {
        let b = row.map_err(|e| ReportError::Benchmarks(format!("row {}: {e}", i + 2)))?;
        if b.total_twh < 0.0 || b.intensity_g_per_kwh < 0.0 {
            return Err(ReportError::Benchmarks(format!("{}: values must be non-negative", b.country)));
        }
        out.push(b);
    }
    Ok(out)
}

/// Compare a subject intensity (the data-center fleet) with each benchmark.
pub fn compare_benchmarks(subject_intensity: f64, benchmarks: &[CountryBenchmark]) -> Vec<BenchmarkComparison> {
    benchmarks
        .iter()
        .map(|b| {
            let ratio = (b.intensity_g_per_kwh > 0.0).then(|| subject_intensity / b.intensity_g_per_kwh);
            BenchmarkComparison {
                country: b.country.clone(),
                benchmark_intensity_g_per_kwh: b.intensity_g_per_kwh,
                subject_intensity_g_per_kwh: subject_intensity,
                ratio,
                percent_difference: ratio.map(|r| (r - 1.0) * 100.0),
            }
        })
        .collect()
}
