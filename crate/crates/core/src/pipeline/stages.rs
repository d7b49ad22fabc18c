use super::artifacts::{read_json, read_regions};
use super::{
    sha256_hex, Dataset, Job, PipelineError, Rollups, RunMetadata, ATTRIBUTION, BA_DETAILS, BENCHMARKS, CONSEQUENTIAL,
    DATASET, DATASET_IMPUTED, EVAL_REPORT, FACILITIES, INGEST_REPORT, MARGINAL_RATES, MODEL, REGIONS, ROLLUPS,
    RUN_META, SUMMARY, TABLE1, UNATTRIBUTABLE,
};
use crate::attribution::{
    attribute_all, consequential_totals, fuel_groups, parse_marginal_rates, totals, ConsequentialSummary,
    FacilityEnergy, Grid,
};
use crate::geo::{parse_regions_geojson, regions_to_geojson, LonLat, RegionSet};
use crate::impute::{impute_missing, power_density_stat, EvalReport, PowerDensityStat};
use crate::ingest::{
    dedup_facilities, filter_contiguous, parse_data_centers, parse_power_plants, IngestReport, PlantFilter,
};
use crate::record::{AssignmentFlag, CapacityProvenance, FuelGroup};
use crate::report::{
    ba_details, compare_benchmarks, export, parse_benchmarks, rollup, table1_csv, BenchmarkComparison, ExportFormat,
    RollupLevel, RollupRow,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

const STAGES: [&str; 4] = ["ingest", "impute", "attribute", "report"];

/// What a stage wrote, for the CLI to print.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub stage: &'static str,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

/// Collects the artifacts of one stage and records them in `run.json`.
struct StageWriter<'a> {
    job: &'a Job,
    stage: &'static str,
    hashes: BTreeMap<String, String>,
    warnings: Vec<String>,
}

impl<'a> StageWriter<'a> {
    fn new(job: &'a Job, stage: &'static str) -> Result<Self, PipelineError> {
        fs::create_dir_all(&job.out_dir).map_err(|e| PipelineError::io(&job.out_dir, e))?;
        Ok(StageWriter { job, stage, hashes: BTreeMap::new(), warnings: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.job.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| PipelineError::Io { path, source: e })?;
        self.hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Drop a stale artifact left by an earlier run with different inputs.
    fn remove(&self, name: &str) -> Result<(), PipelineError> {
        let path = self.job.out_dir.join(name);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(PipelineError::Io { path, source: e }),
        }
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    fn finish(self) -> Result<StageSummary, PipelineError> {
        let job = self.job;
        let meta_path = job.out_dir.join(RUN_META);
        let mut meta: RunMetadata = if self.stage == STAGES[0] {
            RunMetadata::default()
        } else {
            read_json(&job.out_dir, RUN_META).unwrap_or_default()
        };
        meta.tool = env!("CARGO_PKG_NAME").to_string();
        meta.version = env!("CARGO_PKG_VERSION").to_string();
        meta.config = job.config_text.clone();
        meta.overrides = job.overrides.clone();
        meta.inputs = hash_inputs(job)?;
        let pos = STAGES.iter().position(|s| *s == self.stage).expect("known stage");
        for later in &STAGES[pos + 1..] {
            meta.stages.remove(*later);
        }
        let artifacts = self.hashes.keys().cloned().collect();
        meta.stages.insert(self.stage.to_string(), self.hashes);
        let mut bytes = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
        bytes.push(b'\n');
        fs::write(&meta_path, bytes).map_err(|e| PipelineError::Io { path: meta_path, source: e })?;
        Ok(StageSummary { stage: self.stage, artifacts, warnings: self.warnings })
    }
}

fn hash_inputs(job: &Job) -> Result<BTreeMap<String, String>, PipelineError> {
    job.input_paths()
        .into_iter()
        .map(|(label, path)| {
            let bytes = fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
            Ok((label, sha256_hex(&bytes)))
        })
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(|e| PipelineError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentCounts {
    pub contained: usize,
    pub fallback: usize,
    pub ambiguous: usize,
    /// Plants whose input row already named a balancing authority.
    pub from_input: usize,
}

impl AssignmentCounts {
    fn count(&mut self, flag: Option<AssignmentFlag>) {
        match flag {
            None => self.contained += 1,
            Some(AssignmentFlag::Fallback) => self.fallback += 1,
            Some(AssignmentFlag::Ambiguous) => self.ambiguous += 1,
        }
    }
}

#[derive(Serialize)]
struct IngestArtifact<'a> {
    data_centers: &'a IngestReport,
    plants: &'a IngestReport,
    data_center_assignment: AssignmentCounts,
    plant_assignment: AssignmentCounts,
}

/// Parse, filter, de-duplicate and geo-assign the configured inputs.
pub fn ingest(job: &Job) -> Result<StageSummary, PipelineError> {
    job.check_inputs()?;
    let cfg = &job.config;
    let mut w = StageWriter::new(job, "ingest")?;

    let mut dc_report = IngestReport::default();
    let mut records = Vec::new();
    for input in &cfg.inputs.data_centers {
        let (recs, rep) = parse_data_centers(open(&job.input(&input.path))?, input.source)?;
        records.extend(recs);
        dc_report.absorb(rep);
    }
    let records = filter_contiguous(records, &mut dc_report);
    let (mut records, dedup) = dedup_facilities(records, cfg.dedup_radius_m)?;
    dc_report.records_accepted -= dedup.duplicates_merged;
    dc_report.duplicates_merged += dedup.duplicates_merged;
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let mut regions = RegionSet::new(parse_regions_geojson(&read_text(&job.input(&cfg.inputs.regions))?)?)?;
    let mut dc_counts = AssignmentCounts::default();
    for rec in &mut records {
        let a = regions.assign(LonLat::new(rec.longitude, rec.latitude));
        dc_counts.count(a.flag);
        rec.ba_id = Some(a.ba_id);
        rec.ba_flag = a.flag;
    }

    let filter = PlantFilter { min_nameplate_mw: cfg.plant_min_capacity_mw };
    let (mut plants, mut plant_report) = parse_power_plants(open(&job.input(&cfg.inputs.plants))?, filter)?;
    let mut plant_counts = AssignmentCounts::default();
    for p in &mut plants {
        match &p.ba_id {
            Some(ba) => {
                plant_counts.from_input += 1;
                if regions.get(ba).is_none() {
                    plant_report.warnings.push(format!("plant {}: ba_id {ba} has no region polygon", p.plant_id));
                }
            }
            None => {
                let a = regions.assign(LonLat::new(p.longitude, p.latitude));
                plant_counts.count(a.flag);
                p.ba_id = Some(a.ba_id);
            }
        }
    }
    plants.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));

    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in &plants {
        if let Some(ba) = &p.ba_id {
            members.entry(ba.clone()).or_default().push(p.plant_id.clone());
        }
    }
    regions.set_members(|ba| members.get(ba).cloned().unwrap_or_default());

    if dc_counts.fallback > 0 {
        w.warn(format!("{} data centers lay outside every region and took the nearest one", dc_counts.fallback));
    }
    w.write_json(DATASET, &Dataset { data_centers: records, plants })?;
    w.write_json(
        INGEST_REPORT,
        &IngestArtifact {
            data_centers: &dc_report,
            plants: &plant_report,
            data_center_assignment: dc_counts,
            plant_assignment: plant_counts,
        },
    )?;
    let geojson = regions_to_geojson(regions.regions(), |r| {
        let mut m = Map::new();
        m.insert("n_plants".into(), Value::from(r.member_plant_ids.len()));
        m
    });
    w.write_json(REGIONS, &geojson)?;
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeSummary {
    pub n_records: usize,
    pub n_known: usize,
    pub n_imputed: usize,
    pub eval: Option<EvalReport>,
    /// Mean W/sqft over facilities with both a reported capacity and a footage.
    pub power_density: Option<PowerDensityStat>,
    pub importances: BTreeMap<String, f64>,
}

/// Fill missing capacities with a model trained on the known ones.
pub fn impute(job: &Job) -> Result<StageSummary, PipelineError> {
    let dataset: Dataset = read_json(&job.out_dir, DATASET)?;
    let mut w = StageWriter::new(job, "impute")?;
    let n_records = dataset.data_centers.len();
    let n_known = dataset.data_centers.iter().filter(|r| r.power_capacity_mw.is_some()).count();
    let pairs: Vec<(f64, f64)> =
        dataset.data_centers.iter().filter_map(|r| Some((r.square_footage?, r.power_capacity_mw?))).collect();
    let power_density = power_density_stat(&pairs).ok();

    let outcome = impute_missing(dataset.data_centers, &job.gbrt_params())?;
    let summary = ImputeSummary {
        n_records,
        n_known,
        n_imputed: outcome.n_imputed,
        eval: outcome.eval,
        power_density,
        importances: outcome.model.as_ref().map(|m| m.gbrt.gain_importance.clone()).unwrap_or_default(),
    };
    w.write_json(DATASET_IMPUTED, &Dataset { data_centers: outcome.records, plants: dataset.plants })?;
    match &outcome.model {
        Some(model) => {
            let mut text = model.to_json();
            text.push('\n');
            w.write(MODEL, text.as_bytes())?;
        }
        None => w.remove(MODEL)?,
    }
    w.write_json(EVAL_REPORT, &summary)?;
    w.finish()
}

#[derive(Serialize)]
struct FacilitiesArtifact<'a> {
    year: i32,
    default_uptime: f64,
    facilities: &'a [FacilityEnergy],
}

#[derive(Serialize)]
struct UnattributableArtifact<'a> {
    balancing_authorities: Vec<String>,
    facilities: Vec<&'a FacilityEnergy>,
}

#[derive(Serialize)]
struct ConsequentialArtifact {
    attributional_emissions_g: f64,
    consequential: ConsequentialSummary,
}

/// Energy loads, plant-level attribution and roll-ups.
pub fn attribute(job: &Job) -> Result<StageSummary, PipelineError> {
    let dataset: Dataset = read_json(&job.out_dir, DATASET_IMPUTED)?;
    let regions = read_regions(&job.out_dir)?;
    let params = job.load_params()?;
    let mut w = StageWriter::new(job, "attribute")?;

    let grid = Grid::new(&dataset.plants, regions.regions().iter().map(|r| r.ba_id.clone()));
    let run = attribute_all(&dataset.data_centers, &grid, &params)?;

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    for r in &run.results {
        csv_out.serialize(r).expect("in-memory csv write");
    }
    let csv_bytes = csv_out.into_inner().expect("in-memory csv flush");
    w.write(ATTRIBUTION, &csv_bytes)?;
    w.write_json(
        FACILITIES,
        &FacilitiesArtifact { year: run.year, default_uptime: run.default_uptime, facilities: &run.facilities },
    )?;

    let rollups = Rollups {
        national: rollup(&run, RollupLevel::National),
        ba: rollup(&run, RollupLevel::Ba),
        state: rollup(&run, RollupLevel::State),
    };
    let names: BTreeMap<String, String> = regions.regions().iter().map(|r| (r.ba_id.clone(), r.name.clone())).collect();
    w.write_json(BA_DETAILS, &ba_details(&rollups.ba, &grid, &names))?;
    w.write_json(ROLLUPS, &rollups)?;

    let unattributable: Vec<&FacilityEnergy> = run.unattributable().collect();
    let bad_bas = grid.unattributable_bas();
    if !bad_bas.is_empty() {
        w.warn(format!("balancing authorities without eligible plants: {}", bad_bas.join(", ")));
    }
    if !unattributable.is_empty() {
        w.warn(format!("{} facilities could not be attributed; see {UNATTRIBUTABLE}", unattributable.len()));
    }
    w.write_json(
        UNATTRIBUTABLE,
        &UnattributableArtifact { balancing_authorities: bad_bas, facilities: unattributable },
    )?;

    match &job.config.inputs.marginal_rates {
        Some(path) => {
            let bytes = fs::read(job.input(path)).map_err(|e| PipelineError::io(&job.input(path), e))?;
            let rates = parse_marginal_rates(bytes.as_slice())?;
            let consequential = consequential_totals(&run.facilities, &rates);
            if !consequential.excluded_dc_ids.is_empty() {
                w.warn(format!(
                    "{} facilities have no marginal rate and are left out of the consequential total",
                    consequential.excluded_dc_ids.len()
                ));
            }
            let (_, attributional) = totals(&run.results);
            w.write(MARGINAL_RATES, &bytes)?;
            w.write_json(
                CONSEQUENTIAL,
                &ConsequentialArtifact { attributional_emissions_g: attributional, consequential },
            )?;
        }
        None => {
            w.remove(MARGINAL_RATES)?;
            w.remove(CONSEQUENTIAL)?;
        }
    }
    w.finish()
}

#[derive(Serialize)]
struct Summary<'a> {
    year: i32,
    national: &'a RollupRow,
    fuel_groups: BTreeMap<FuelGroup, f64>,
    n_imputed_capacities: Option<usize>,
    benchmarks: Vec<BenchmarkComparison>,
}

/// Rounded exports, the ranked state table and benchmark comparisons.
pub fn report(job: &Job) -> Result<StageSummary, PipelineError> {
    let rollups: Rollups = read_json(&job.out_dir, ROLLUPS)?;
    let mut w = StageWriter::new(job, "report")?;
    for level in RollupLevel::ALL {
        let r = rollups.get(level);
        w.write(&format!("rollup_{level}.csv"), &export(r, ExportFormat::Csv))?;
        w.write(&format!("rollup_{level}.json"), &export(r, ExportFormat::Json))?;
    }
    w.write(TABLE1, &table1_csv(&rollups.state, job.config.table_rows))?;

    let national = rollups.national.rows.first().cloned().unwrap_or_else(|| RollupRow {
        key: crate::report::NATIONAL_KEY.to_string(),
        n_data_centers: 0,
        total_capacity_mw: 0.0,
        energy_twh: 0.0,
        emissions_mt: 0.0,
        intensity_g_per_kwh: None,
        fuel_mix: BTreeMap::new(),
        primary_ba: None,
    });
    let benchmarks = match (&job.config.inputs.benchmarks, national.intensity_g_per_kwh) {
        (Some(path), Some(intensity)) => {
            let list = parse_benchmarks(open(&job.input(path))?)?;
            compare_benchmarks(intensity, &list)
        }
        (Some(_), None) => {
            w.warn("no attributed load; benchmark comparison skipped".to_string());
            Vec::new()
        }
        (None, _) => Vec::new(),
    };
    if job.config.inputs.benchmarks.is_some() {
        let mut out = csv::Writer::from_writer(Vec::new());
        for b in &benchmarks {
            out.serialize(b).expect("in-memory csv write");
        }
        if benchmarks.is_empty() {
            out.write_record([
                "country",
                "benchmark_intensity_g_per_kwh",
                "subject_intensity_g_per_kwh",
                "ratio",
                "percent_difference",
            ])
            .expect("in-memory csv write");
        }
        w.write(BENCHMARKS, &out.into_inner().expect("in-memory csv flush"))?;
    } else {
        w.remove(BENCHMARKS)?;
    }

    let n_imputed = read_json::<Dataset>(&job.out_dir, DATASET_IMPUTED)
        .ok()
        .map(|d| d.data_centers.iter().filter(|r| r.capacity_provenance == Some(CapacityProvenance::Imputed)).count());
    w.write_json(
        SUMMARY,
        &Summary {
            year: rollups.national.year,
            fuel_groups: fuel_groups(&national.fuel_mix),
            national: &national,
            n_imputed_capacities: n_imputed,
            benchmarks,
        },
    )?;
    w.finish()
}

/// All four stages in order.
pub fn run_all(job: &Job) -> Result<Vec<StageSummary>, PipelineError> {
    Ok(vec![ingest(job)?, impute(job)?, attribute(job)?, report(job)?])
}
