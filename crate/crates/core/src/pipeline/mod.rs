//! Config-driven batch stages that write a reproducible artifact directory.
//!
//! Stages run in order (ingest, impute, attribute, report) and communicate
//! only through files in the output directory, so each can be rerun alone.
//! Every stage refreshes `run.json` with the verbatim config, input hashes
//! and the hashes of the artifacts it wrote.

mod artifacts;
mod stages;

pub use artifacts::{Artifacts, Dataset, Rollups};
pub use stages::{attribute, impute, ingest, report, run_all, AssignmentCounts, ImputeSummary, StageSummary};

use crate::attribution::{AttributionError, LoadParams, DEFAULT_INVENTORY_YEAR, DEFAULT_UPTIME};
use crate::geo::GeoError;
use crate::impute::{GbrtParams, ImputeError};
use crate::ingest::IngestError;
use crate::record::SqftSource;
use crate::report::ReportError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DATASET: &str = "dataset.json";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const REGIONS: &str = "regions.geojson";
pub const DATASET_IMPUTED: &str = "dataset_imputed.json";
pub const MODEL: &str = "model.json";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const ATTRIBUTION: &str = "attribution.csv";
pub const FACILITIES: &str = "facilities.json";
pub const ROLLUPS: &str = "rollups.json";
pub const BA_DETAILS: &str = "ba_details.json";
pub const UNATTRIBUTABLE: &str = "unattributable.json";
pub const CONSEQUENTIAL: &str = "consequential.json";
pub const MARGINAL_RATES: &str = "marginal_rates.csv";
pub const TABLE1: &str = "table1.csv";
pub const SUMMARY: &str = "summary.json";
pub const BENCHMARKS: &str = "benchmarks.csv";
pub const RUN_META: &str = "run.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("config: {0}")]
    Config(String),
    #[error("artifact {}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl PipelineError {
    /// Fatal errors stop a run before any data is judged: unreadable or
    /// missing files, bad configuration, invalid hyperparameters.
    /// Everything else is a validation failure of the input data.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            PipelineError::Io { .. }
                | PipelineError::MissingInput(_)
                | PipelineError::Config(_)
                | PipelineError::Artifact { .. }
                | PipelineError::Impute(ImputeError::InvalidParams(_))
        )
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            PipelineError::MissingInput(path.to_path_buf())
        } else {
            PipelineError::Io { path: path.to_path_buf(), source }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCenterInput {
    pub path: PathBuf,
    pub source: SqftSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub data_centers: Vec<DataCenterInput>,
    pub plants: PathBuf,
    pub regions: PathBuf,
    #[serde(default)]
    pub benchmarks: Option<PathBuf>,
    #[serde(default)]
    pub marginal_rates: Option<PathBuf>,
}

/// GBRT hyperparameters as written in the config. The seed lives at the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbrtSection {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub test_fraction: f64,
    pub capacity_floor_mw: f64,
}

impl Default for GbrtSection {
    fn default() -> Self {
        let d = GbrtParams::default();
        GbrtSection {
            n_trees: d.n_trees,
            learning_rate: d.learning_rate,
            max_depth: d.max_depth,
            min_samples_leaf: d.min_samples_leaf,
            test_fraction: d.test_fraction,
            capacity_floor_mw: d.capacity_floor_mw,
        }
    }
}

fn default_uptime() -> f64 {
    DEFAULT_UPTIME
}
fn default_year() -> i32 {
    DEFAULT_INVENTORY_YEAR
}
fn default_radius() -> f64 {
    50.0
}
fn default_min_nameplate() -> f64 {
    25.0
}
fn default_seed() -> u64 {
    GbrtParams::default().seed
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_table_rows() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    #[serde(default = "default_uptime")]
    pub uptime: f64,
    /// Inventory year the plant data describes.
    #[serde(default = "default_year")]
    pub year: i32,
    #[serde(default = "default_radius")]
    pub dedup_radius_m: f64,
    #[serde(default = "default_min_nameplate")]
    pub plant_min_capacity_mw: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub gbrt: GbrtSection,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Rows in the ranked state table.
    #[serde(default = "default_table_rows")]
    pub table_rows: usize,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uptime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: RunConfig,
    /// The config file as read, echoed into `run.json`.
    pub config_text: String,
    /// Relative input paths resolve against this directory.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
}

impl Job {
    pub fn from_file(path: &Path, overrides: Overrides) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Job::from_toml(&text, &base, overrides)
    }

    pub fn from_toml(text: &str, base_dir: &Path, overrides: Overrides) -> Result<Self, PipelineError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if let Some(u) = overrides.uptime {
            config.uptime = u;
        }
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        let out_dir = match &overrides.out_dir {
            Some(dir) => dir.clone(),
            None => base_dir.join(&config.out_dir),
        };
        let job = Job { config, config_text: text.to_string(), base_dir: base_dir.to_path_buf(), out_dir, overrides };
        job.validate()?;
        Ok(job)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let c = &self.config;
        if c.inputs.data_centers.is_empty() {
            return Err(PipelineError::Config("inputs.data_centers lists no files".into()));
        }
        if !(c.uptime > 0.0 && c.uptime <= 1.0) {
            return Err(PipelineError::Config(format!("uptime must lie in (0, 1], got {}", c.uptime)));
        }
        if !(c.dedup_radius_m > 0.0) || !c.dedup_radius_m.is_finite() {
            return Err(PipelineError::Config(format!("dedup_radius_m must be positive, got {}", c.dedup_radius_m)));
        }
        if !(c.plant_min_capacity_mw >= 0.0) {
            return Err(PipelineError::Config("plant_min_capacity_mw must be non-negative".into()));
        }
        self.gbrt_params().validate()?;
        Ok(())
    }

    pub fn input(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    /// Every input path named by the config, in a fixed order.
    pub fn input_paths(&self) -> Vec<(String, PathBuf)> {
        let i = &self.config.inputs;
        let mut out: Vec<(String, PathBuf)> =
            i.data_centers.iter().map(|d| (d.path.display().to_string(), self.input(&d.path))).collect();
        out.push((i.plants.display().to_string(), self.input(&i.plants)));
        out.push((i.regions.display().to_string(), self.input(&i.regions)));
        for p in [&i.benchmarks, &i.marginal_rates].into_iter().flatten() {
            out.push((p.display().to_string(), self.input(p)));
        }
        out
    }

    pub fn check_inputs(&self) -> Result<(), PipelineError> {
        for (_, path) in self.input_paths() {
            if !path.is_file() {
                return Err(PipelineError::MissingInput(path));
            }
        }
        Ok(())
    }

    pub fn gbrt_params(&self) -> GbrtParams {
        let g = &self.config.gbrt;
        GbrtParams {
            n_trees: g.n_trees,
            learning_rate: g.learning_rate,
            max_depth: g.max_depth,
            min_samples_leaf: g.min_samples_leaf,
            test_fraction: g.test_fraction,
            seed: self.config.seed,
            capacity_floor_mw: g.capacity_floor_mw,
        }
    }

    pub fn load_params(&self) -> Result<LoadParams, PipelineError> {
        Ok(LoadParams::new(self.config.uptime, self.config.year)?)
    }
}

/// Contents of `run.json`. Contains no timestamps or absolute paths so that
/// identical runs produce identical files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub config: String,
    pub overrides: Overrides,
    /// Input path as written in the config, mapped to its SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Stage name, then artifact file name, mapped to SHA-256.
    pub stages: BTreeMap<String, BTreeMap<String, String>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
